#include "snaper/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "snaper/errors.hpp"

namespace snaper {

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// JSON rejects non-finite numbers; reports clamp them to huge sentinels.
double json_safe(double x) {
  if (std::isnan(x)) return -1.0;
  if (std::isinf(x)) return x > 0 ? 1e300 : -1e300;
  return x;
}

}  // namespace

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw RunError("cannot create output directory '" + dir +
                   "': " + ec.message());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw RunError("cannot open for writing: " + path);
  }
  out << content;
  if (!out) {
    throw RunError("write failed: " + path);
  }
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RunError("cannot open for hashing: " + path);
  }
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

std::string report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model_name;
  j["criterion"] = r.criterion;
  j["dim"] = r.dim;
  j["chains"] = r.n_chains;
  j["draws"] = r.n_draws;
  j["warmup_steps"] = r.warmup_steps;
  j["seed"] = r.seed;
  j["min_ess"] = json_safe(r.min_ess);
  j["argmin_dim"] = r.argmin_dim;
  j["min_ess_per_grad"] = json_safe(r.min_ess_per_grad);
  j["ess_f_criterion"] = json_safe(r.ess_f_criterion);
  j["ess_max_f_criterion"] = json_safe(r.ess_max_f_criterion);
  j["ess_f_snaper"] = json_safe(r.ess_f_snaper);
  j["ess_max_f_snaper"] = json_safe(r.ess_max_f_snaper);
  j["ess_f_chees"] = json_safe(r.ess_f_chees);
  j["ess_max_f_chees"] = json_safe(r.ess_max_f_chees);
  j["esjd_f_criterion"] = json_safe(r.esjd_f_criterion);
  j["max_rhat"] = json_safe(r.max_rhat);
  j["grad_count"] = r.grad_count;
  j["warmup_grad_count"] = r.warmup_grad_count;
  j["sampling_grad_count"] = r.grad_count - r.warmup_grad_count;
  j["tau_mean"] = json_safe(r.tau_mean);
  j["step_size"] = json_safe(r.step_size);
  j["phi_tau_avg"] = json_safe(r.phi_tau_avg);
  j["phi_eps_avg"] = json_safe(r.phi_eps_avg);
  j["harmonic_accept_post"] = json_safe(r.harmonic_accept_post);
  j["mean_accept_post"] = json_safe(r.mean_accept_post);
  j["converged"] = r.converged;
  j["divergent_iterations"] = r.divergent_iterations;
  return j.dump(2) + "\n";
}

std::string report_dims_to_csv(const RunReport& r, const Trace& trace) {
  std::string out = "dim,ess_z2,rhat,mean,std,mass_v,principal\n";
  const Eigen::VectorXd mu = trace.n_draws > 0
                                 ? trace.grand_means()
                                 : Eigen::VectorXd::Zero(r.dim);
  for (int d = 0; d < r.dim; ++d) {
    double sd = 0.0;
    if (trace.n_draws > 0) {
      double acc = 0.0;
      for (long t = 0; t < trace.n_draws; ++t) {
        for (long b = 0; b < trace.n_chains; ++b) {
          const double z = trace.at(t, b, d) - mu(d);
          acc += z * z;
        }
      }
      sd = std::sqrt(acc / static_cast<double>(trace.n_draws * trace.n_chains));
    }
    out += std::to_string(d) + "," +
           fmt(r.ess_per_dim.size() > d ? r.ess_per_dim(d) : 0.0) + "," +
           fmt(r.rhat.size() > d ? r.rhat(d) : 0.0) + "," + fmt(mu(d)) + "," +
           fmt(sd) + "," +
           fmt(r.mass_diag.size() > d ? r.mass_diag(d) : 0.0) + "," +
           fmt(r.principal.size() > d ? r.principal(d) : 0.0) + "\n";
  }
  return out;
}

namespace {

void append_stats_row(std::string& out, const StepStats& s,
                      const char* phase) {
  out += std::to_string(s.iteration);
  out += ",";
  out += phase;
  out += "," + fmt(s.phi_tau) + "," + fmt(s.phi_eps) + "," +
         fmt(s.step_size) + "," + fmt(s.tau) + "," +
         std::to_string(s.leapfrog_steps) + "," + fmt(s.mean_accept) + "," +
         fmt(s.harmonic_accept) + "," + fmt(s.criterion_value) + "," +
         fmt(s.grad_phi_tau) + "," + fmt(s.max_variance) + "," +
         std::to_string(s.divergent) + "," +
         (s.phi_tau_updated ? "1" : "0") + "\n";
}

}  // namespace

std::string hyper_trace_to_csv(const std::vector<StepStats>& warmup,
                               const std::vector<StepStats>& sampling) {
  std::string out =
      "iteration,phase,phi_tau,phi_eps,step_size,tau,leapfrog_steps,"
      "mean_accept,harmonic_accept,criterion_value,grad_phi_tau,"
      "max_variance,divergent,phi_tau_updated\n";
  for (const auto& s : warmup) append_stats_row(out, s, "warmup");
  for (const auto& s : sampling) append_stats_row(out, s, "sampling");
  return out;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out =
      "grid_tau,mean_leapfrog,mean_tau,test_function,ess,ess_max,esjd,"
      "sampling_grads,ess_per_grad,ess_max_per_grad,esjd_per_grad\n";
  for (const auto& r : result.rows) {
    out += fmt(r.grid_tau) + "," + fmt(r.observed_mean_leapfrog) + "," +
           fmt(r.observed_mean_tau) + "," + r.test_function + "," +
           fmt(r.ess_value) + "," + fmt(r.ess_max_value) + "," +
           fmt(r.esjd_value) + "," + std::to_string(r.sampling_grads) + "," +
           fmt(r.ess_per_grad) + "," + fmt(r.ess_max_per_grad) + "," +
           fmt(r.esjd_per_grad) + "\n";
  }
  return out;
}

std::string compare_rows_to_csv(const CompareResult& result) {
  std::string out =
      "criterion,replicate,seed,min_ess_per_grad,warmup_grads,"
      "sampling_grads,total_grads,converged,tau_mean,harmonic_accept\n";
  for (const auto& r : result.rows) {
    out += r.criterion + "," + std::to_string(r.replicate) + "," +
           std::to_string(r.seed) + "," + fmt(r.min_ess_per_grad) + "," +
           std::to_string(r.warmup_grads) + "," +
           std::to_string(r.sampling_grads) + "," +
           std::to_string(r.total_grads) + "," +
           (r.converged ? "1" : "0") + "," + fmt(r.tau_mean) + "," +
           fmt(r.harmonic_accept) + "\n";
  }
  return out;
}

std::string compare_summary_to_csv(const CompareResult& result) {
  std::string out = "criterion,metric,percentile_value,median_value\n";
  const char* metric = result.mode == CompareMode::kLongRun
                           ? "min_ess_per_grad"
                           : "total_grads";
  for (const auto& s : result.summaries) {
    out += s.criterion;
    out += ",";
    out += metric;
    out += "," + fmt(s.percentile_value) + "," + fmt(s.median_value) + "\n";
  }
  return out;
}

void write_draws(const std::string& dir, const Trace& trace) {
  const std::string bin_path = dir + "/draws.bin";
  std::ofstream out(bin_path, std::ios::binary);
  if (!out) {
    throw RunError("cannot open for writing: " + bin_path);
  }
  static_assert(sizeof(double) == 8);
  // Host is little-endian on every supported platform; the sidecar records
  // the byte order explicitly.
  out.write(reinterpret_cast<const char*>(trace.data.data()),
            static_cast<std::streamsize>(trace.data.size() * sizeof(double)));
  if (!out) {
    throw RunError("write failed: " + bin_path);
  }

  nlohmann::ordered_json j;
  j["shape"] = {trace.n_draws, trace.n_chains, trace.dim};
  j["dtype"] = "float64";
  j["order"] = "row_major(draw,chain,dim)";
  j["byte_order"] = "little_endian";
  j["grad_count"] = trace.grad_count;
  j["warmup_grad_count"] = trace.warmup_grad_count;
  write_text_file(dir + "/draws.json", j.dump(2) + "\n");
}

void write_run_outputs(const std::string& out_dir,
                       const std::map<std::string, std::string>& resolved,
                       const RunOutputs& outs) {
  ensure_directory(out_dir);
  write_text_file(out_dir + "/resolved_config.txt",
                  serialize_key_values(resolved));
  write_text_file(out_dir + "/hyper_trace.csv",
                  hyper_trace_to_csv(outs.warmup_trace, outs.sampling_trace));
  write_text_file(out_dir + "/report.json", report_to_json(outs.report));
  write_text_file(out_dir + "/report_dims.csv",
                  report_dims_to_csv(outs.report, outs.trace));
  auto it = resolved.find("sampling.store_draws");
  if (it == resolved.end() || it->second == "true") {
    write_draws(out_dir, outs.trace);
  }
}

}  // namespace snaper
