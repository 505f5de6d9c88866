#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "phonodiverge/stats.hpp"
#include "phonodiverge/svm.hpp"
#include "phonodiverge/textgrid.hpp"

namespace phonodiverge {

enum class TableFormat { kCsv, kMarkdown };

std::string_view to_string(TableFormat f);
TableFormat parse_table_format(std::string_view s);

struct RunConfig {
  std::string manifest;
  std::string out_dir;
  uint64_t seed = 0;
  size_t min_count = 20;
  double alpha = 0.1;
  stats::CovarianceMode cov_mode = stats::CovarianceMode::kFullShrinkage;
  double svm_c = 1.0;
  /// <= 0 means 1/d.
  double svm_gamma = 0.0;
  double svm_tol = 1e-3;
  int svm_max_passes = 10;
  double split_ratio = 0.8;
  int kfold = 0;
  std::string tier = "phones";
  textgrid::SilenceSet silence = textgrid::default_silence_labels();
  TableFormat format = TableFormat::kCsv;
  bool per_speaker = false;
  /// Worker count; never changes results, so it is left out of snapshots.
  int jobs = 1;

  /// Throws ValidationError on out-of-range fields.
  void validate() const;

  svm::EvalConfig eval_config() const;
  corpus::CellOptions cell_options() const;
};

/// Snapshot of every result-affecting field (manifest, seed, estimator and
/// classifier settings). Output directory and worker count are excluded.
nlohmann::json to_json(const RunConfig& cfg);

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
RunConfig merge_config(RunConfig base, const nlohmann::json& j);

}  // namespace phonodiverge
