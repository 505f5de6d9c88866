#pragma once

#include <set>
#include <string>
#include <vector>

#include "phonodiverge/config.hpp"
#include "phonodiverge/corpus.hpp"
#include "phonodiverge/svm.hpp"

namespace phonodiverge::report {

struct PhonemeCellResult {
  corpus::CellKey key;
  double kld = 0.0;
  double accuracy = 0.0;
  svm::ConfusionCounts confusion;
  size_t n_real = 0;
  size_t n_fake = 0;

  bool operator==(const PhonemeCellResult&) const = default;
};

struct ResultSet {
  std::vector<PhonemeCellResult> rows;  // sorted by (system, emotion, phoneme, speaker)
  std::vector<corpus::Exclusion> excluded;
  RunConfig config;
};

/// Fits both Gaussians, computes the symmetric KLD and the SVM accuracy of
/// every cell. OpenMP-parallel over cells with `jobs` threads; each cell's
/// seed depends only on its key, so results do not depend on scheduling.
std::vector<PhonemeCellResult> evaluate_cells(const corpus::CellSet& cells, const RunConfig& cfg);
std::vector<PhonemeCellResult> evaluate_cells_serial(const corpus::CellSet& cells,
                                                     const RunConfig& cfg);

/// manifest -> cells -> per-cell KLD and accuracy.
ResultSet run_pipeline(const RunConfig& cfg);

enum class PhonemeClass { kVowel, kConsonant };
std::string_view to_string(PhonemeClass c);

struct Condition {
  corpus::System system = corpus::System::kEvc1;
  corpus::Emotion emotion = corpus::Emotion::kAngry;
  std::string speaker;

  auto operator<=>(const Condition&) const = default;
  bool operator==(const Condition&) const = default;
};

/// "EVC1-Angry", or "EVC1-Angry@0011" for a per-speaker condition.
std::string condition_name(const Condition& c);

struct CorrelationResult {
  Condition condition;
  PhonemeClass phoneme_class = PhonemeClass::kVowel;
  double r = 0.0;
  double p = 1.0;
  double t = 0.0;
  size_t n = 0;
};

struct CorrelationReport {
  std::vector<CorrelationResult> rows;  // (emotion, system, speaker, class) order
  std::vector<std::string> warnings;    // skipped undersized groups
};

std::set<std::string> default_vowel_set();

/// Pearson r between KLD and accuracy across the phonemes of each
/// (condition, class) group. Groups with fewer than 3 phonemes are skipped
/// with a warning.
CorrelationReport correlate_conditions(const ResultSet& rs,
                                       const std::set<std::string>& vowels = default_vowel_set());

/// Writes the vowel table, the consonant table and the correlation table.
/// KLD is printed with 2 decimals, accuracy (%) with 1, r with 2, p with 4;
/// missing entries are "—". Returns the written paths.
std::vector<std::string> emit_tables(const ResultSet& rs, const CorrelationReport& corr,
                                     TableFormat format, const std::string& out_dir);

/// Renders one table in memory (used by emit_tables and the CLI).
std::string render_phoneme_table(const ResultSet& rs, PhonemeClass cls, TableFormat format,
                                 const std::string& speaker = {});
std::string render_correlation_table(const CorrelationReport& corr, TableFormat format);

/// results.csv, exclusions.csv and config.json under out_dir.
std::vector<std::string> write_results(const ResultSet& rs, const std::string& out_dir);
ResultSet read_results(const std::string& dir);

std::string format_results_csv(const ResultSet& rs);
std::vector<PhonemeCellResult> parse_results_csv(std::string_view text);

}  // namespace phonodiverge::report
