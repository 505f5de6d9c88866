#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <regex>

#include "phonodiverge/error.hpp"
#include "phonodiverge/reference_tables.hpp"
#include "phonodiverge/report.hpp"
#include "phonodiverge/rng.hpp"
#include "phonodiverge/synth.hpp"
#include "test_util.hpp"

using namespace phonodiverge;
using namespace phonodiverge::report;
using testutil::TempDir;

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  auto lines = split_line(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

const CorrelationResult* find(const CorrelationReport& rep, corpus::System s, corpus::Emotion e,
                              PhonemeClass cls) {
  for (const auto& r : rep.rows) {
    if (r.condition.system == s && r.condition.emotion == e && r.phoneme_class == cls) return &r;
  }
  return nullptr;
}

PhonemeCellResult row(const std::string& ph, corpus::System s, corpus::Emotion e, double kld, double acc) {
  PhonemeCellResult r;
  r.key = {ph, e, s, ""};
  r.kld = kld;
  r.accuracy = acc;
  return r;
}

RunConfig synthetic_run(const TempDir& dir, int jobs) {
  synth::SynthSpec spec;
  spec.dim = 4;
  spec.seed = 21;
  spec.phonemes.push_back({"AA", synth::ClassDistribution::isotropic(4, 0, 1),
                           synth::ClassDistribution::isotropic(4, 0, 1), 60});
  spec.phonemes.push_back({"SH", synth::ClassDistribution::isotropic(4, 0, 1),
                           synth::ClassDistribution::isotropic(4, 4, 1), 60});
  RunConfig cfg;
  cfg.manifest = synth::gen_synthetic_corpus(spec, dir.str("corpus"));
  cfg.seed = 7;
  cfg.jobs = jobs;
  return cfg;
}

}  // namespace

TEST(Correlate, PublishedVowelHappy) {
  const auto rep = correlate_conditions(reference::reference_result_set());
  const auto* r = find(rep, corpus::System::kEvc1, corpus::Emotion::kHappy, PhonemeClass::kVowel);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->n, 15u);
  EXPECT_NEAR(r->r, 0.75, 0.02);
  EXPECT_NEAR(r->p, 0.0012, 0.0005);
}

TEST(Correlate, PublishedConsonantSurprise) {
  const auto rep = correlate_conditions(reference::reference_result_set());
  const auto* r = find(rep, corpus::System::kEvc1, corpus::Emotion::kSurprise, PhonemeClass::kConsonant);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->n, 23u);
  EXPECT_NEAR(r->r, 0.69, 0.02);
  EXPECT_NEAR(r->p, 0.0002, 0.0005);
}

TEST(Correlate, SixteenRowsFromFullTables) {
  const auto rep = correlate_conditions(reference::reference_result_set());
  EXPECT_EQ(rep.rows.size(), 16u);
  EXPECT_TRUE(rep.warnings.empty());
}

TEST(Correlate, AffineGroupHasUnitR) {
  ResultSet rs;
  for (int k = 0; k < 5; ++k) {
    rs.rows.push_back(row(std::string(1, static_cast<char>('B' + k)), corpus::System::kEvc1,
                          corpus::Emotion::kAngry, 1.0 + k, 0.5 + 0.05 * k));
  }
  // B..F are consonants.
  const auto rep = correlate_conditions(rs);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_NEAR(rep.rows[0].r, 1.0, 1e-12);
}

TEST(Correlate, UndersizedGroupsWarn) {
  ResultSet rs;
  rs.rows.push_back(row("AA", corpus::System::kEvc1, corpus::Emotion::kAngry, 1, 0.6));
  rs.rows.push_back(row("AE", corpus::System::kEvc1, corpus::Emotion::kAngry, 2, 0.7));
  const auto rep = correlate_conditions(rs);
  EXPECT_TRUE(rep.rows.empty());
  ASSERT_EQ(rep.warnings.size(), 1u);
}

TEST(Correlate, RowOrderInvariant) {
  auto rs = reference::reference_result_set();
  const auto base = correlate_conditions(rs);
  Rng rng(3);
  rng.shuffle(rs.rows.begin(), rs.rows.end());
  const auto shuffled = correlate_conditions(rs);
  ASSERT_EQ(base.rows.size(), shuffled.rows.size());
  for (size_t i = 0; i < base.rows.size(); ++i) {
    EXPECT_EQ(base.rows[i].r, shuffled.rows[i].r);
    EXPECT_EQ(base.rows[i].p, shuffled.rows[i].p);
  }
}

TEST(Tables, PublishedValuesRoundTrip) {
  const auto rs = reference::reference_result_set();
  std::map<std::string, std::vector<std::string>> emitted;
  for (auto cls : {PhonemeClass::kVowel, PhonemeClass::kConsonant}) {
    const auto lines = lines_of(render_phoneme_table(rs, cls, TableFormat::kCsv));
    for (size_t i = 1; i < lines.size(); ++i) {
      auto cells = split_line(lines[i], ',');
      emitted[cells[0]] = cells;
    }
  }
  EXPECT_EQ(emitted.size(), 38u);
  for (std::string_view block : {reference::kVowelTable, reference::kConsonantTable}) {
    for (const auto& line : lines_of(std::string(block))) {
      const auto printed = split_line(line, ',');
      EXPECT_EQ(emitted.at(printed[0]), printed) << line;
    }
  }
}

TEST(Tables, VowelRowsAndHeader) {
  const auto lines = lines_of(render_phoneme_table(reference::reference_result_set(), PhonemeClass::kVowel,
                                                   TableFormat::kCsv));
  ASSERT_EQ(lines.size(), 16u);
  EXPECT_EQ(split_line(lines[0], ',').size(), 17u);
  EXPECT_EQ(lines[0].substr(0, 33), "Phoneme,EVC1-Angry KLD,EVC1-Angry");
}

TEST(Tables, SingleCellMarksTheRest) {
  ResultSet rs;
  rs.rows.push_back(row("AA", corpus::System::kEvc2, corpus::Emotion::kSad, 3.14159, 0.8125));
  const auto lines = lines_of(render_phoneme_table(rs, PhonemeClass::kVowel, TableFormat::kCsv));
  ASSERT_EQ(lines.size(), 2u);
  const auto cells = split_line(lines[1], ',');
  ASSERT_EQ(cells.size(), 17u);
  EXPECT_EQ(cells[0], "AA");
  EXPECT_EQ(cells[13], "3.14");
  EXPECT_EQ(cells[14], "81.2");
  EXPECT_EQ(std::count(cells.begin(), cells.end(), "—"), 14);
  EXPECT_EQ(lines_of(render_phoneme_table(rs, PhonemeClass::kConsonant, TableFormat::kCsv)).size(), 1u);
}

TEST(Tables, MarkdownAndCsvShareNumbers) {
  const auto rs = reference::reference_result_set();
  const auto corr = correlate_conditions(rs);
  const std::regex number(R"([0-9]+\.[0-9]+)");
  auto numbers = [&](const std::string& s) {
    std::vector<std::string> out;
    for (std::sregex_iterator it(s.begin(), s.end(), number), end; it != end; ++it) out.push_back(it->str());
    return out;
  };
  for (auto cls : {PhonemeClass::kVowel, PhonemeClass::kConsonant}) {
    EXPECT_EQ(numbers(render_phoneme_table(rs, cls, TableFormat::kCsv)),
              numbers(render_phoneme_table(rs, cls, TableFormat::kMarkdown)));
  }
  EXPECT_EQ(numbers(render_correlation_table(corr, TableFormat::kCsv)),
            numbers(render_correlation_table(corr, TableFormat::kMarkdown)));
}

TEST(Tables, CorrelationLayout) {
  const auto lines = lines_of(render_correlation_table(correlate_conditions(reference::reference_result_set()),
                                                       TableFormat::kCsv));
  ASSERT_EQ(lines.size(), 9u);
  EXPECT_EQ(lines[0], "Condition,Vowels r,Vowels p,Consonants r,Consonants p");
  EXPECT_EQ(lines[1].substr(0, 11), "EVC1-Angry,");
  EXPECT_EQ(lines[2].substr(0, 11), "EVC2-Angry,");
  EXPECT_EQ(lines[3], "EVC1-Happy,0.75,0.0012,0.46,0.0276");
}

TEST(Tables, EmitWritesThreeFiles) {
  TempDir dir;
  const auto rs = reference::reference_result_set();
  const auto paths = emit_tables(rs, correlate_conditions(rs), TableFormat::kMarkdown, dir.str());
  ASSERT_EQ(paths.size(), 3u);
  for (const auto& p : paths) EXPECT_TRUE(std::filesystem::exists(p)) << p;
  EXPECT_THROW(emit_tables(ResultSet{}, {}, TableFormat::kCsv, dir.str()), ValidationError);
}

TEST(Tables, PerSpeakerFilesSuffixed) {
  TempDir dir;
  ResultSet rs;
  for (const char* spk : {"0011", "0012"}) {
    auto r = row("AA", corpus::System::kEvc1, corpus::Emotion::kAngry, 1, 0.7);
    r.key.speaker = spk;
    rs.rows.push_back(r);
  }
  const auto paths = emit_tables(rs, correlate_conditions(rs), TableFormat::kCsv, dir.str());
  EXPECT_EQ(paths.size(), 5u);
  EXPECT_TRUE(std::filesystem::exists(dir.str("table_vowels_0012.csv")));
}

TEST(Results, CsvRoundTripExact) {
  auto rs = reference::reference_result_set();
  rs.rows[0].kld = 1.0 / 3.0;
  rs.rows[0].confusion = {1, 2, 3, 4};
  rs.rows[0].n_real = 9;
  rs.rows[1].key.speaker = "spk,\"quoted\"";
  const auto back = parse_results_csv(format_results_csv(rs));
  auto sorted = rs.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return std::tie(a.key.system, a.key.emotion, a.key.phoneme, a.key.speaker) <
           std::tie(b.key.system, b.key.emotion, b.key.phoneme, b.key.speaker);
  });
  EXPECT_EQ(back, sorted);
}

TEST(Results, MalformedRejected) {
  const std::string header = "system,emotion,phoneme,speaker,kld,accuracy,tp,tn,fp,fn,n_real,n_fake\n";
  EXPECT_THROW(parse_results_csv(header + "EVC1,ANGRY,AA,,x,0.5,0,0,0,0,0,0\n"), ParseError);
  EXPECT_THROW(parse_results_csv(header + "EVC1,ANGRY,AA,,1,1.5,0,0,0,0,0,0\n"), ParseError);
  EXPECT_THROW(parse_results_csv(header + "EVC1,ANGRY,AA\n"), ParseError);
  EXPECT_THROW(parse_results_csv(header + "EVC1,ANGRY,AA,,1,0.5,0,0,0,0,0,0\nEVC1,ANGRY,AA,,1,0.5,0,0,0,0,0,0\n"),
               ValidationError);
}

TEST(Results, WriteReadDirectory) {
  TempDir dir;
  auto rs = reference::reference_result_set();
  rs.config.seed = 99;
  rs.excluded.push_back({{"ZH", corpus::Emotion::kSad, corpus::System::kEvc2, ""}, 4, 4});
  write_results(rs, dir.str());
  const auto back = read_results(dir.str());
  EXPECT_EQ(back.rows, rs.rows);
  EXPECT_EQ(back.config.seed, 99u);
  ASSERT_EQ(back.excluded.size(), 1u);
  EXPECT_EQ(back.excluded[0].key.phoneme, "ZH");
  EXPECT_THROW(read_results(dir.str("nope")), IoError);
}

TEST(Pipeline, TwoPhonemeCorpus) {
  TempDir dir;
  const auto rs = run_pipeline(synthetic_run(dir, 1));
  ASSERT_EQ(rs.rows.size(), 2u);
  EXPECT_EQ(rs.rows[0].key.phoneme, "AA");
  EXPECT_EQ(rs.rows[1].key.phoneme, "SH");
  EXPECT_GT(rs.rows[1].kld, rs.rows[0].kld);
  EXPECT_GT(rs.rows[1].accuracy, rs.rows[0].accuracy);
  for (const auto& r : rs.rows) EXPECT_DOUBLE_EQ(r.accuracy, svm::accuracy(r.confusion));
}

TEST(Pipeline, EmptyManifest) {
  TempDir dir;
  testutil::spit(dir.str("m.jsonl"), "");
  RunConfig cfg;
  cfg.manifest = dir.str("m.jsonl");
  const auto rs = run_pipeline(cfg);
  EXPECT_TRUE(rs.rows.empty());
  EXPECT_TRUE(rs.excluded.empty());
}

TEST(Pipeline, DeterministicAcrossRunsAndWorkers) {
  TempDir dir;
  const auto a = run_pipeline(synthetic_run(dir, 1));
  const auto b = run_pipeline(synthetic_run(dir, 1));
  const auto c = run_pipeline(synthetic_run(dir, 4));
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.rows, c.rows);
}

TEST(Pipeline, ParallelCellsMatchSerial) {
  TempDir dir;
  const auto cfg = synthetic_run(dir, 3);
  const auto cells = corpus::build_cells(corpus::read_manifest(cfg.manifest), cfg.cell_options());
  EXPECT_EQ(evaluate_cells(cells, cfg), evaluate_cells_serial(cells, cfg));
}

TEST(Pipeline, NumericErrorNamesCell) {
  TempDir dir;
  auto cfg = synthetic_run(dir, 1);
  auto cells = corpus::build_cells(corpus::read_manifest(cfg.manifest), cfg.cell_options());
  // Non-finite embedding rows cannot be fitted.
  cells.cells.begin()->second.real[0][0] = std::nan("");
  try {
    evaluate_cells(cells, cfg);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("EVC1-Angry/AA"), std::string::npos) << e.what();
  }
}
