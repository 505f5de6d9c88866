#include "phonodiverge/reference_tables.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>
#include <stdexcept>

#include "phonodiverge/corpus.hpp"

namespace phonodiverge::reference {

// Published per-phoneme values, transcribed verbatim. One row per phoneme:
// (KLD, accuracy %) for each condition in system-major order.
const std::string_view kVowelTable = R"(AA,15.95,80.1,15.66,81.6,13.89,81.9,16.81,78.1,15.06,82.4,14.41,76.6,15.05,79.0,12.92,70.1
AE,14.62,83.8,13.82,75.3,13.35,85.6,13.78,82.1,11.29,78.4,11.96,70.9,12.50,79.8,11.45,73.2
AH,8.64,77.8,7.98,80.0,9.18,77.6,8.07,79.9,7.32,72.3,6.30,70.6,7.99,77.6,6.04,72.8
AO,29.50,87.5,31.83,83.3,33.86,84.9,43.41,79.6,26.06,82.7,29.26,79.2,29.96,73.1,26.31,73.5
AW,29.16,87.3,24.65,83.3,21.79,79.6,27.63,83.3,22.22,85.2,24.31,90.7,20.86,85.2,26.57,74.1
AY,19.65,85.4,20.96,84.8,22.51,86.5,19.54,89.0,12.78,78.7,16.59,76.2,18.61,88.3,14.41,74.4
EH,11.57,77.5,11.67,75.0,14.73,86.7,9.82,76.0,9.30,77.6,9.66,68.9,12.20,79.3,9.21,72.7
ER,19.22,81.6,20.30,76.9,18.11,80.9,21.31,79.4,16.91,80.7,16.76,73.5,17.50,86.8,14.35,71.5
EY,19.28,90.1,20.16,83.5,25.26,89.8,18.96,87.0,16.18,80.2,17.26,81.7,21.31,76.9,18.39,76.9
IH,11.21,80.8,8.53,72.2,11.73,78.7,8.18,82.2,7.84,71.6,6.93,70.1,9.20,80.4,6.59,69.7
IY,13.42,82.8,11.01,73.0,13.35,86.7,10.96,81.2,11.23,73.0,10.69,76.6,12.97,78.3,10.11,74.8
OW,23.59,86.2,23.23,80.2,25.09,87.4,23.08,80.2,17.03,88.5,20.59,80.2,20.88,89.7,17.89,75.6
OY,22.14,75.0,25.04,75.0,23.82,87.5,34.77,75.0,19.50,81.2,20.96,93.8,23.90,93.8,22.27,75.0
UH,53.21,83.8,51.30,92.1,40.53,86.5,64.29,89.7,40.99,83.8,36.58,74.4,34.48,83.8,42.86,78.9
UW,21.01,83.3,18.88,84.1,20.90,89.2,22.13,87.0,19.26,86.1,17.91,86.9,18.67,92.8,19.29,76.9
)";

const std::string_view kConsonantTable = R"(B,26.74,78.9,26.32,69.5,34.16,87.4,25.64,83.2,28.52,69.5,28.63,84.2,34.51,83.2,26.59,76.8
CH,48.79,76.2,47.15,83.7,33.32,83.7,53.37,88.4,38.76,88.1,42.85,86.0,30.95,93.0,51.24,86.0
D,11.80,78.4,10.07,75.7,15.05,81.8,11.25,78.9,10.67,73.3,12.34,67.8,13.81,76.6,14.49,77.2
DH,22.53,78.6,18.16,75.7,31.87,75.7,19.31,72.2,19.65,81.4,19.23,77.8,31.19,80.6,20.70,73.6
F,18.47,84.9,18.34,77.4,14.16,83.0,20.12,81.1,16.07,81.1,18.72,76.4,14.75,67.0,18.04,79.2
G,16.82,87.1,21.17,85.7,26.32,85.7,21.17,80.0,19.04,72.9,18.46,81.4,23.23,80.0,22.93,78.6
HH,22.88,75.4,18.32,76.9,18.78,83.1,17.18,77.3,18.18,68.5,19.24,75.4,17.31,70.0,18.43,77.3
JH,51.58,84.4,45.51,86.7,37.51,88.9,49.29,88.9,44.93,86.7,45.67,82.2,37.35,88.9,42.62,86.7
K,11.13,82.5,12.60,75.8,16.24,82.6,11.55,76.9,9.98,81.9,11.48,72.7,14.91,82.0,10.94,76.9
L,11.50,74.3,10.99,74.8,11.56,73.6,10.70,74.8,11.09,70.8,11.07,73.8,11.59,79.1,8.54,71.8
M,10.31,73.0,10.50,65.5,13.43,84.5,10.62,75.9,10.40,77.0,11.47,79.3,12.12,80.5,8.32,73.0
N,7.82,77.0,7.77,79.8,10.47,82.5,7.69,81.3,6.24,73.7,6.98,75.7,8.66,79.8,6.14,74.9
NG,25.04,85.4,22.16,87.5,22.02,79.2,23.86,87.5,22.52,85.4,22.22,85.4,25.86,83.3,26.11,83.3
P,18.21,78.2,16.86,74.5,20.16,84.5,17.19,80.9,14.50,71.8,14.49,81.8,18.32,85.5,13.63,71.8
R,10.48,75.2,14.12,85.3,12.41,79.2,14.73,79.5,11.29,72.2,11.54,74.2,12.37,77.9,9.28,70.9
S,13.09,76.1,13.36,81.6,9.62,77.9,15.59,79.1,12.05,82.9,13.87,79.1,10.92,79.6,14.33,77.4
SH,48.56,78.3,42.07,85.0,28.71,65.0,48.39,85.0,37.60,71.7,43.61,85.0,27.97,70.0,40.29,75.0
T,7.62,74.0,7.35,73.6,11.47,76.2,8.42,75.4,6.78,69.7,6.68,71.3,11.26,76.5,7.70,77.7
TH,32.04,74.0,31.32,90.4,25.05,86.8,28.17,88.5,27.26,72.0,32.30,86.8,26.40,82.7,24.93,84.6
V,24.48,81.7,22.29,73.2,30.83,81.7,22.98,81.7,20.39,86.6,19.07,85.4,24.88,89.0,18.55,82.9
W,18.55,79.6,22.34,76.6,17.71,79.6,20.14,79.6,17.95,75.2,21.81,78.8,16.23,75.2,15.93,78.8
Y,28.28,75.7,30.19,76.8,29.48,95.7,28.04,74.3,29.95,78.6,28.72,72.5,29.85,75.4,26.90,71.4
Z,15.38,83.1,14.18,84.9,13.53,81.9,15.68,78.9,14.56,78.3,14.58,78.3,11.99,81.9,15.75,74.7
)";

// Published correlation rows: condition, vowel r, vowel p, consonant r, consonant p.
const std::string_view kCorrelationTable = R"(EVC1-Angry,0.37,0.1770,0.16,0.4670
EVC2-Angry,0.63,0.0115,0.35,0.1060
EVC1-Happy,0.75,0.0012,0.46,0.0279
EVC2-Happy,0.45,0.0947,0.63,0.0013
EVC1-Sad,0.46,0.0880,0.29,0.1860
EVC2-Sad,0.19,0.4900,0.39,0.0674
EVC1-Surprise,0.31,0.2680,0.69,0.0002
EVC2-Surprise,0.68,0.0053,0.59,0.0030
)";

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

std::vector<report::Condition> column_conditions() {
  std::vector<report::Condition> out;
  for (auto system : corpus::kFakeSystems) {
    for (auto emotion : corpus::kAllEmotions) out.push_back({system, emotion, {}});
  }
  return out;
}

void parse_block(std::string_view text, std::vector<PrintedCell>& out) {
  const auto conds = column_conditions();
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 1 + 2 * conds.size()) throw std::logic_error("reference table row: " + line);
    for (size_t c = 0; c < conds.size(); ++c) {
      out.push_back({f[0], conds[c], f[1 + 2 * c], f[2 + 2 * c]});
    }
  }
}

report::Condition parse_condition(const std::string& name) {
  const auto dash = name.find('-');
  return {corpus::parse_system(name.substr(0, dash)), corpus::parse_emotion(name.substr(dash + 1)),
          {}};
}

}  // namespace

std::vector<PrintedCell> printed_cells() {
  std::vector<PrintedCell> out;
  parse_block(kVowelTable, out);
  parse_block(kConsonantTable, out);
  return out;
}

report::ResultSet reference_result_set() {
  report::ResultSet rs;
  for (const auto& cell : printed_cells()) {
    report::PhonemeCellResult row;
    row.key = {cell.phoneme, cell.condition.emotion, cell.condition.system, {}};
    row.kld = std::stod(cell.kld);
    row.accuracy = std::stod(cell.accuracy) / 100.0;
    rs.rows.push_back(row);
  }
  std::sort(rs.rows.begin(), rs.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.key.system, a.key.emotion, a.key.phoneme) <
           std::tie(b.key.system, b.key.emotion, b.key.phoneme);
  });
  return rs;
}

std::vector<PrintedCorrelation> printed_correlations() {
  std::vector<PrintedCorrelation> out;
  std::istringstream in{std::string(kCorrelationTable)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    const auto cond = parse_condition(f.at(0));
    out.push_back({cond, report::PhonemeClass::kVowel, std::stod(f.at(1)), std::stod(f.at(2))});
    out.push_back(
        {cond, report::PhonemeClass::kConsonant, std::stod(f.at(3)), std::stod(f.at(4))});
  }
  return out;
}

}  // namespace phonodiverge::reference
