#include "phonodiverge/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "phonodiverge/error.hpp"
#include "phonodiverge/phoneset.hpp"
#include "phonodiverge/stats.hpp"

namespace phonodiverge::report {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMissing = "—";

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, int line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field", line_no);
  return fields;
}

double to_double(const std::string& s, int line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("malformed number '" + s + "'", line_no);
  }
  return v;
}

size_t to_count(const std::string& s, int line_no) {
  size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("malformed count '" + s + "'", line_no);
  }
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failure on '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool row_order(const PhonemeCellResult& a, const PhonemeCellResult& b) {
  return std::tie(a.key.system, a.key.emotion, a.key.phoneme, a.key.speaker) <
         std::tie(b.key.system, b.key.emotion, b.key.phoneme, b.key.speaker);
}

PhonemeCellResult evaluate_one(const corpus::Cell& cell, const RunConfig& cfg) {
  try {
    PhonemeCellResult row;
    row.key = cell.key;
    row.n_real = cell.real.size();
    row.n_fake = cell.fake.size();
    const auto real = stats::fit_gaussian(cell.real, cfg.cov_mode, cfg.alpha);
    const auto fake = stats::fit_gaussian(cell.fake, cfg.cov_mode, cfg.alpha);
    row.kld = stats::sym_kld(real, fake);
    const auto eval = svm::evaluate_cell(cell, cfg.eval_config(), svm::cell_seed(cell.key, cfg.seed));
    row.accuracy = eval.accuracy;
    row.confusion = eval.confusion;
    return row;
  } catch (const NumericError& e) {
    throw NumericError("cell " + corpus::describe(cell.key) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("cell " + corpus::describe(cell.key) + ": " + e.what());
  }
}

}  // namespace

std::vector<PhonemeCellResult> evaluate_cells_serial(const corpus::CellSet& cells,
                                                     const RunConfig& cfg) {
  std::vector<PhonemeCellResult> rows;
  rows.reserve(cells.cells.size());
  for (const auto& [_, cell] : cells.cells) rows.push_back(evaluate_one(cell, cfg));
  std::sort(rows.begin(), rows.end(), row_order);
  return rows;
}

std::vector<PhonemeCellResult> evaluate_cells(const corpus::CellSet& cells, const RunConfig& cfg) {
  std::vector<const corpus::Cell*> work;
  work.reserve(cells.cells.size());
  for (const auto& [_, cell] : cells.cells) work.push_back(&cell);

  std::vector<PhonemeCellResult> rows(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  const auto n = static_cast<long>(work.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, cfg.jobs))
  for (long i = 0; i < n; ++i) {
    try {
      rows[static_cast<size_t>(i)] = evaluate_one(*work[static_cast<size_t>(i)], cfg);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::sort(rows.begin(), rows.end(), row_order);
  return rows;
}

ResultSet run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  ResultSet rs;
  rs.config = cfg;
  const auto records = corpus::read_manifest(cfg.manifest);
  const auto cells = corpus::build_cells(records, cfg.cell_options());
  rs.excluded = cells.excluded;
  rs.rows = cfg.jobs > 1 ? evaluate_cells(cells, cfg) : evaluate_cells_serial(cells, cfg);
  return rs;
}

std::string_view to_string(PhonemeClass c) {
  return c == PhonemeClass::kVowel ? "vowel" : "consonant";
}

std::string condition_name(const Condition& c) {
  std::string s = std::string(corpus::to_string(c.system)) + "-" +
                  std::string(corpus::display_name(c.emotion));
  if (!c.speaker.empty()) s += "@" + c.speaker;
  return s;
}

std::set<std::string> default_vowel_set() { return {kVowels.begin(), kVowels.end()}; }

CorrelationReport correlate_conditions(const ResultSet& rs, const std::set<std::string>& vowels) {
  struct Group {
    std::vector<std::pair<std::string, std::pair<double, double>>> points;
  };
  // Keyed so the output runs emotion-major, matching the usual table layout.
  using GroupKey = std::tuple<corpus::Emotion, corpus::System, std::string, PhonemeClass>;
  std::map<GroupKey, Group> groups;
  for (const auto& row : rs.rows) {
    const PhonemeClass cls =
        vowels.count(row.key.phoneme) ? PhonemeClass::kVowel : PhonemeClass::kConsonant;
    groups[{row.key.emotion, row.key.system, row.key.speaker, cls}].points.push_back(
        {row.key.phoneme, {row.kld, row.accuracy}});
  }

  CorrelationReport out;
  for (auto& [key, group] : groups) {
    const auto& [emotion, system, speaker, cls] = key;
    const Condition cond{system, emotion, speaker};
    // Phoneme order makes the sums independent of input row order.
    std::sort(group.points.begin(), group.points.end());
    if (group.points.size() < 3) {
      out.warnings.push_back("skipping " + condition_name(cond) + " " +
                             std::string(to_string(cls)) + "s: only " +
                             std::to_string(group.points.size()) + " phoneme(s), need 3");
      continue;
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [_, xy] : group.points) {
      xs.push_back(xy.first);
      ys.push_back(xy.second);
    }
    try {
      const auto pr = stats::pearson(xs, ys);
      out.rows.push_back({cond, cls, pr.r, pr.p, pr.t, pr.n});
    } catch (const ValidationError& e) {
      out.warnings.push_back("skipping " + condition_name(cond) + " " +
                             std::string(to_string(cls)) + "s: " + e.what());
    }
  }
  return out;
}

namespace {

std::vector<Condition> table_conditions(const std::string& speaker) {
  std::vector<Condition> conds;
  for (auto system : corpus::kFakeSystems) {
    for (auto emotion : corpus::kAllEmotions) conds.push_back({system, emotion, speaker});
  }
  return conds;
}

std::string render_rows(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows, TableFormat format) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& cells) {
    if (format == TableFormat::kCsv) {
      for (size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + csv_field(cells[k]);
    } else {
      out += "|";
      for (const auto& c : cells) out += " " + c + " |";
    }
    out += "\n";
  };
  emit(header);
  if (format == TableFormat::kMarkdown) {
    out += "|";
    for (size_t k = 0; k < header.size(); ++k) out += k == 0 ? " --- |" : " ---: |";
    out += "\n";
  }
  for (const auto& r : rows) emit(r);
  return out;
}

std::set<std::string> speakers_of(const ResultSet& rs) {
  std::set<std::string> s;
  for (const auto& row : rs.rows) s.insert(row.key.speaker);
  return s;
}

}  // namespace

std::string render_phoneme_table(const ResultSet& rs, PhonemeClass cls, TableFormat format,
                                 const std::string& speaker) {
  const auto vowels = default_vowel_set();
  const auto conds = table_conditions(speaker);
  std::map<std::string, std::map<Condition, const PhonemeCellResult*>> by_phoneme;
  for (const auto& row : rs.rows) {
    if (row.key.speaker != speaker) continue;
    const bool vowel = vowels.count(row.key.phoneme) > 0;
    if (vowel != (cls == PhonemeClass::kVowel)) continue;
    by_phoneme[row.key.phoneme][{row.key.system, row.key.emotion, row.key.speaker}] = &row;
  }

  std::vector<std::string> header = {"Phoneme"};
  for (const auto& c : conds) {
    header.push_back(condition_name(c) + " KLD");
    header.push_back(condition_name(c) + " Acc");
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& [phoneme, cells] : by_phoneme) {
    std::vector<std::string> r = {phoneme};
    for (const auto& c : conds) {
      auto it = cells.find(c);
      if (it == cells.end()) {
        r.push_back(kMissing);
        r.push_back(kMissing);
      } else {
        r.push_back(fixed(it->second->kld, 2));
        r.push_back(fixed(100.0 * it->second->accuracy, 1));
      }
    }
    rows.push_back(std::move(r));
  }
  return render_rows(header, rows, format);
}

std::string render_correlation_table(const CorrelationReport& corr, TableFormat format) {
  std::map<Condition, std::map<PhonemeClass, const CorrelationResult*>> by_cond;
  for (const auto& row : corr.rows) by_cond[row.condition][row.phoneme_class] = &row;
  std::vector<Condition> order;
  for (const auto& [cond, _] : by_cond) order.push_back(cond);
  std::sort(order.begin(), order.end(), [](const Condition& a, const Condition& b) {
    return std::tie(a.speaker, a.emotion, a.system) < std::tie(b.speaker, b.emotion, b.system);
  });

  const std::vector<std::string> header = {"Condition", "Vowels r", "Vowels p", "Consonants r",
                                           "Consonants p"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& cond : order) {
    std::vector<std::string> r = {condition_name(cond)};
    for (auto cls : {PhonemeClass::kVowel, PhonemeClass::kConsonant}) {
      auto it = by_cond[cond].find(cls);
      if (it == by_cond[cond].end()) {
        r.push_back(kMissing);
        r.push_back(kMissing);
      } else {
        r.push_back(fixed(it->second->r, 2));
        r.push_back(fixed(it->second->p, 4));
      }
    }
    rows.push_back(std::move(r));
  }
  return render_rows(header, rows, format);
}

std::vector<std::string> emit_tables(const ResultSet& rs, const CorrelationReport& corr,
                                     TableFormat format, const std::string& out_dir) {
  if (rs.rows.empty()) throw ValidationError("emit_tables: empty result set");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const std::string ext = format == TableFormat::kCsv ? ".csv" : ".md";
  std::vector<std::string> paths;
  for (const auto& speaker : speakers_of(rs)) {
    const std::string suffix = speaker.empty() ? "" : "_" + speaker;
    for (auto cls : {PhonemeClass::kVowel, PhonemeClass::kConsonant}) {
      const std::string name =
          (cls == PhonemeClass::kVowel ? "table_vowels" : "table_consonants") + suffix + ext;
      const std::string path = (fs::path(out_dir) / name).string();
      write_text(path, render_phoneme_table(rs, cls, format, speaker));
      paths.push_back(path);
    }
  }
  const std::string path = (fs::path(out_dir) / ("table_correlation" + ext)).string();
  write_text(path, render_correlation_table(corr, format));
  paths.push_back(path);
  return paths;
}

std::string format_results_csv(const ResultSet& rs) {
  std::string out = "system,emotion,phoneme,speaker,kld,accuracy,tp,tn,fp,fn,n_real,n_fake\n";
  for (const auto& r : rs.rows) {
    out += std::string(corpus::to_string(r.key.system)) + "," +
           std::string(corpus::to_string(r.key.emotion)) + "," + csv_field(r.key.phoneme) + "," +
           csv_field(r.key.speaker) + "," + exact(r.kld) + "," + exact(r.accuracy) + "," +
           std::to_string(r.confusion.tp) + "," + std::to_string(r.confusion.tn) + "," +
           std::to_string(r.confusion.fp) + "," + std::to_string(r.confusion.fn) + "," +
           std::to_string(r.n_real) + "," + std::to_string(r.n_fake) + "\n";
  }
  return out;
}

std::vector<PhonemeCellResult> parse_results_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<PhonemeCellResult> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.find_first_not_of(" \r") == std::string::npos) continue;
    const auto f = split_csv_line(line, line_no);
    if (f.size() != 12) throw ParseError("expected 12 fields, found " + std::to_string(f.size()), line_no);
    PhonemeCellResult r;
    try {
      r.key.system = corpus::parse_system(f[0]);
      r.key.emotion = corpus::parse_emotion(f[1]);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    r.key.phoneme = f[2];
    r.key.speaker = f[3];
    r.kld = to_double(f[4], line_no);
    r.accuracy = to_double(f[5], line_no);
    r.confusion = {to_count(f[6], line_no), to_count(f[7], line_no), to_count(f[8], line_no),
                   to_count(f[9], line_no)};
    r.n_real = to_count(f[10], line_no);
    r.n_fake = to_count(f[11], line_no);
    if (!(r.kld >= 0.0)) throw ParseError("negative KLD", line_no);
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw ParseError("accuracy outside [0, 1]", line_no);
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), row_order);
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].key == rows[i - 1].key) {
      throw ValidationError("duplicate result row for " + corpus::describe(rows[i].key));
    }
  }
  return rows;
}

std::vector<std::string> write_results(const ResultSet& rs, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const std::string results = (fs::path(out_dir) / "results.csv").string();
  const std::string exclusions = (fs::path(out_dir) / "exclusions.csv").string();
  const std::string config = (fs::path(out_dir) / "config.json").string();
  write_text(results, format_results_csv(rs));

  std::string ex = "system,emotion,phoneme,speaker,n_real,n_fake\n";
  for (const auto& e : rs.excluded) {
    ex += std::string(corpus::to_string(e.key.system)) + "," +
          std::string(corpus::to_string(e.key.emotion)) + "," + csv_field(e.key.phoneme) + "," +
          csv_field(e.key.speaker) + "," + std::to_string(e.n_real) + "," +
          std::to_string(e.n_fake) + "\n";
  }
  write_text(exclusions, ex);
  write_text(config, to_json(rs.config).dump(2) + "\n");
  return {results, exclusions, config};
}

ResultSet read_results(const std::string& dir) {
  ResultSet rs;
  const std::string results = (fs::path(dir) / "results.csv").string();
  try {
    rs.rows = parse_results_csv(read_text(results));
  } catch (const ParseError& e) {
    throw e.in(results);
  }
  const fs::path config = fs::path(dir) / "config.json";
  if (fs::exists(config)) {
    try {
      rs.config = merge_config(RunConfig{}, json::parse(read_text(config.string())));
    } catch (const json::exception& e) {
      throw ValidationError(config.string() + ": " + e.what());
    }
  }
  const fs::path exclusions = fs::path(dir) / "exclusions.csv";
  if (fs::exists(exclusions)) {
    std::istringstream in(read_text(exclusions.string()));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line_no == 1 || line.empty()) continue;
      const auto f = split_csv_line(line, line_no);
      if (f.size() != 6) throw ValidationError(exclusions.string() + ": malformed row");
      corpus::Exclusion e;
      e.key = {f[2], corpus::parse_emotion(f[1]), corpus::parse_system(f[0]), f[3]};
      e.n_real = to_count(f[4], line_no);
      e.n_fake = to_count(f[5], line_no);
      rs.excluded.push_back(std::move(e));
    }
  }
  return rs;
}

}  // namespace phonodiverge::report
