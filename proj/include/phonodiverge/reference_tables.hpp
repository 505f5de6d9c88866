#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "phonodiverge/report.hpp"

// Published per-phoneme KLD/accuracy values and correlation rows, shipped so
// the correlation analysis can be checked offline.
namespace phonodiverge::reference {

extern const std::string_view kVowelTable;
extern const std::string_view kConsonantTable;
extern const std::string_view kCorrelationTable;

/// One printed cell pair, kept as text for round-trip checks.
struct PrintedCell {
  std::string phoneme;
  report::Condition condition;
  std::string kld;
  std::string accuracy;  // percent
};

std::vector<PrintedCell> printed_cells();

/// 38 phonemes x 8 conditions. accuracy = printed percent / 100, confusion
/// counts are zero, n_real/n_fake are zero.
report::ResultSet reference_result_set();

struct PrintedCorrelation {
  report::Condition condition;
  report::PhonemeClass phoneme_class = report::PhonemeClass::kVowel;
  double r = 0.0;
  double p = 1.0;
};

/// 16 rows: 8 conditions x {vowel, consonant}.
std::vector<PrintedCorrelation> printed_correlations();

}  // namespace phonodiverge::reference
