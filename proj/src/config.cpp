#include "phonodiverge/config.hpp"

#include <cmath>
#include <set>

#include "phonodiverge/error.hpp"
#include "phonodiverge/rng.hpp"

namespace phonodiverge {
using nlohmann::json;

std::string_view to_string(TableFormat f) { return f == TableFormat::kCsv ? "csv" : "markdown"; }

TableFormat parse_table_format(std::string_view s) {
  if (s == "csv" || s == "CSV") return TableFormat::kCsv;
  if (s == "markdown" || s == "md" || s == "MARKDOWN") return TableFormat::kMarkdown;
  throw ValidationError("unknown table format '" + std::string(s) + "'");
}

void RunConfig::validate() const {
  if (min_count < 2) throw ValidationError("min_count must be >= 2");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (!(svm_c > 0.0) || !std::isfinite(svm_c)) throw ValidationError("svm C must be positive");
  if (!std::isfinite(svm_gamma)) throw ValidationError("svm gamma must be finite");
  if (!(svm_tol > 0.0)) throw ValidationError("svm tol must be positive");
  if (svm_max_passes < 1) throw ValidationError("svm max_passes must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1)");
  if (kfold == 1 || kfold < 0) throw ValidationError("kfold must be 0 (hold-out) or >= 2");
  if (tier.empty()) throw ValidationError("tier name must not be empty");
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
}

svm::EvalConfig RunConfig::eval_config() const {
  svm::EvalConfig e;
  e.svm.C = svm_c;
  e.svm.gamma = svm_gamma;
  e.svm.tol = svm_tol;
  e.svm.max_passes = svm_max_passes;
  e.split_ratio = split_ratio;
  e.kfold = kfold;
  e.min_count = min_count;
  return e;
}

corpus::CellOptions RunConfig::cell_options() const {
  corpus::CellOptions o;
  o.tier_name = tier;
  o.silence = silence;
  o.min_count = min_count;
  o.per_speaker = per_speaker;
  o.jobs = jobs;
  return o;
}

json to_json(const RunConfig& cfg) {
  return json{{"manifest", cfg.manifest},
              {"seed", cfg.seed},
              {"min_count", cfg.min_count},
              {"alpha", cfg.alpha},
              {"cov_mode", stats::to_string(cfg.cov_mode)},
              {"svm_c", cfg.svm_c},
              {"svm_gamma", cfg.svm_gamma},
              {"svm_tol", cfg.svm_tol},
              {"svm_max_passes", cfg.svm_max_passes},
              {"split_ratio", cfg.split_ratio},
              {"kfold", cfg.kfold},
              {"tier", cfg.tier},
              {"silence", std::vector<std::string>(cfg.silence.begin(), cfg.silence.end())},
              {"format", to_string(cfg.format)},
              {"per_speaker", cfg.per_speaker},
              {"normal_generator", kNormalGenerator}};
}

RunConfig merge_config(RunConfig base, const json& j) {
  static const std::set<std::string> kKeys = {
      "manifest", "out_dir",   "seed",  "min_count", "alpha",  "cov_mode",
      "svm_c",    "svm_gamma", "svm_tol", "svm_max_passes", "split_ratio", "kfold",
      "tier",     "silence",   "format", "per_speaker", "jobs", "normal_generator"};
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  try {
    for (const auto& [key, _] : j.items()) {
      if (!kKeys.count(key)) throw ValidationError("unknown config key '" + key + "'");
    }
    if (j.contains("manifest")) base.manifest = j["manifest"].get<std::string>();
    if (j.contains("out_dir")) base.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("seed")) base.seed = j["seed"].get<uint64_t>();
    if (j.contains("min_count")) base.min_count = j["min_count"].get<size_t>();
    if (j.contains("alpha")) base.alpha = j["alpha"].get<double>();
    if (j.contains("cov_mode")) base.cov_mode = stats::parse_covariance_mode(j["cov_mode"].get<std::string>());
    if (j.contains("svm_c")) base.svm_c = j["svm_c"].get<double>();
    if (j.contains("svm_gamma")) base.svm_gamma = j["svm_gamma"].get<double>();
    if (j.contains("svm_tol")) base.svm_tol = j["svm_tol"].get<double>();
    if (j.contains("svm_max_passes")) base.svm_max_passes = j["svm_max_passes"].get<int>();
    if (j.contains("split_ratio")) base.split_ratio = j["split_ratio"].get<double>();
    if (j.contains("kfold")) base.kfold = j["kfold"].get<int>();
    if (j.contains("tier")) base.tier = j["tier"].get<std::string>();
    if (j.contains("silence")) {
      const auto labels = j["silence"].get<std::vector<std::string>>();
      base.silence = textgrid::SilenceSet(labels.begin(), labels.end());
    }
    if (j.contains("format")) base.format = parse_table_format(j["format"].get<std::string>());
    if (j.contains("per_speaker")) base.per_speaker = j["per_speaker"].get<bool>();
    if (j.contains("jobs")) base.jobs = j["jobs"].get<int>();
    if (j.contains("normal_generator") && j["normal_generator"].get<std::string>() != kNormalGenerator) {
      throw ValidationError("config requests normal generator '" +
                            j["normal_generator"].get<std::string>() + "', this build provides '" +
                            std::string(kNormalGenerator) + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return base;
}

}  // namespace phonodiverge
