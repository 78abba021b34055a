#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snaper/diagnostics.hpp"
#include "snaper/harness.hpp"
#include "snaper/sampler.hpp"

namespace snaper {

void ensure_directory(const std::string& dir);
void write_text_file(const std::string& path, const std::string& content);
std::uint64_t hash_file(const std::string& path);  // FNV-1a over the bytes

// Flat key-value JSON document of the scalar report fields.
std::string report_to_json(const RunReport& report);

// One row per dimension: ess of (x_d - mu_d)^2, split R-hat, trace moments,
// preconditioner entry and principal-component coordinate.
std::string report_dims_to_csv(const RunReport& report, const Trace& trace);

// Per-iteration hyperparameter trace (warmup then sampling rows).
std::string hyper_trace_to_csv(const std::vector<StepStats>& warmup,
                               const std::vector<StepStats>& sampling);

std::string sweep_to_csv(const SweepResult& result);
std::string compare_rows_to_csv(const CompareResult& result);
std::string compare_summary_to_csv(const CompareResult& result);

// draws.bin: little-endian float64, (draw, chain, dim) row-major, plus a
// JSON sidecar describing shape/dtype/order.
void write_draws(const std::string& dir, const Trace& trace);

// Writes resolved_config.txt, hyper_trace.csv, report.json, report_dims.csv
// and (when store_draws) draws.bin + draws.json into out_dir.
void write_run_outputs(const std::string& out_dir,
                       const std::map<std::string, std::string>& resolved,
                       const RunOutputs& outs);

}  // namespace snaper
