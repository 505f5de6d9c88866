#include "phonodiverge/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "phonodiverge/config.hpp"
#include "phonodiverge/corpus.hpp"
#include "phonodiverge/error.hpp"
#include "phonodiverge/pitch.hpp"
#include "phonodiverge/reference_tables.hpp"
#include "phonodiverge/report.hpp"
#include "phonodiverge/stats.hpp"
#include "phonodiverge/svm.hpp"
#include "phonodiverge/synth.hpp"

namespace phonodiverge {
namespace {
namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failure on '" + path + "'");
}

std::string timestamped_run_dir() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return (fs::path("runs") / buf).string();
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

uint64_t parse_seed(const std::string& text, const std::string& source) {
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(source + ": invalid seed '" + text + "'");
  }
}

// Flags shared by the subcommands that run the pipeline. Unset flags leave
// the config-file or default value alone.
struct RunFlags {
  std::string config_path;
  std::optional<std::string> manifest;
  std::optional<std::string> out_dir;
  std::optional<uint64_t> seed;
  std::optional<size_t> min_count;
  std::optional<double> alpha;
  std::optional<std::string> cov_mode;
  std::optional<double> svm_c;
  std::optional<double> svm_gamma;
  std::optional<double> svm_tol;
  std::optional<int> svm_max_passes;
  std::optional<double> split_ratio;
  std::optional<int> kfold;
  std::optional<std::string> tier;
  std::vector<std::string> silence;
  std::optional<std::string> format;
  bool per_speaker = false;
  std::optional<int> jobs;

  void attach(CLI::App* app, bool with_out) {
    app->add_option("--config", config_path, "JSON config file (flags override it)");
    app->add_option("--manifest", manifest, "Manifest (JSON lines)");
    if (with_out) app->add_option("--out", out_dir, "Output directory (default runs/<timestamp>)");
    app->add_option("--seed", seed, "Global seed (falls back to PHONODIVERGE_SEED)");
    app->add_option("--min-count", min_count, "Minimum segments per class");
    app->add_option("--alpha", alpha, "Covariance shrinkage in [0, 1]");
    app->add_option("--cov-mode", cov_mode, "full_shrinkage | diagonal");
    app->add_option("--svm-c", svm_c, "SVM box constraint");
    app->add_option("--svm-gamma", svm_gamma, "RBF gamma (<= 0 means 1/d)");
    app->add_option("--svm-tol", svm_tol, "SMO KKT tolerance");
    app->add_option("--svm-max-passes", svm_max_passes, "SMO sweeps without progress before stopping");
    app->add_option("--split-ratio", split_ratio, "Train fraction for the hold-out split");
    app->add_option("--kfold", kfold, "k-fold cross-validation (0 = hold-out)");
    app->add_option("--tier", tier, "Phone tier name");
    app->add_option("--silence", silence, "Silence labels")->delimiter(',');
    app->add_option("--format", format, "csv | markdown");
    app->add_flag("--per-speaker", per_speaker, "Separate cells per speaker");
    app->add_option("--jobs", jobs, "Worker threads (default: all cores)");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    cfg.jobs = default_jobs();
    if (const char* env = std::getenv("PHONODIVERGE_SEED"); env && *env) {
      cfg.seed = parse_seed(env, "PHONODIVERGE_SEED");
    }
    if (!config_path.empty()) {
      try {
        cfg = merge_config(cfg, json::parse(read_file(config_path)));
      } catch (const json::exception& e) {
        throw ValidationError(config_path + ": " + e.what());
      }
    }
    if (manifest) cfg.manifest = *manifest;
    if (out_dir) cfg.out_dir = *out_dir;
    if (seed) cfg.seed = *seed;
    if (min_count) cfg.min_count = *min_count;
    if (alpha) cfg.alpha = *alpha;
    if (cov_mode) cfg.cov_mode = stats::parse_covariance_mode(*cov_mode);
    if (svm_c) cfg.svm_c = *svm_c;
    if (svm_gamma) cfg.svm_gamma = *svm_gamma;
    if (svm_tol) cfg.svm_tol = *svm_tol;
    if (svm_max_passes) cfg.svm_max_passes = *svm_max_passes;
    if (split_ratio) cfg.split_ratio = *split_ratio;
    if (kfold) cfg.kfold = *kfold;
    if (tier) cfg.tier = *tier;
    if (!silence.empty()) cfg.silence = {silence.begin(), silence.end()};
    if (format) cfg.format = parse_table_format(*format);
    if (per_speaker) cfg.per_speaker = true;
    if (jobs) cfg.jobs = *jobs;
    if (cfg.manifest.empty()) throw ValidationError("--manifest is required");
    cfg.validate();
    return cfg;
  }
};

corpus::CellSet load_cells(const RunConfig& cfg) {
  return corpus::build_cells(corpus::read_manifest(cfg.manifest), cfg.cell_options());
}

void warn_exclusions(const std::vector<corpus::Exclusion>& excluded, std::ostream& err) {
  for (const auto& e : excluded) {
    err << "excluded " << corpus::describe(e.key) << " (real " << e.n_real << ", fake "
        << e.n_fake << ")\n";
  }
}

int run_analyze(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  RunConfig cfg = flags.resolve();
  if (cfg.out_dir.empty()) cfg.out_dir = timestamped_run_dir();
  const auto rs = report::run_pipeline(cfg);
  warn_exclusions(rs.excluded, err);
  auto paths = report::write_results(rs, cfg.out_dir);
  if (!rs.rows.empty()) {
    const auto corr = report::correlate_conditions(rs);
    for (const auto& w : corr.warnings) err << "warning: " << w << "\n";
    const auto tables = report::emit_tables(rs, corr, cfg.format, cfg.out_dir);
    paths.insert(paths.end(), tables.begin(), tables.end());
  }
  out << rs.rows.size() << " cells evaluated, " << rs.excluded.size() << " excluded\n";
  for (const auto& p : paths) out << p << "\n";
  return 0;
}

int run_kld(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.resolve();
  const auto cells = load_cells(cfg);
  warn_exclusions(cells.excluded, err);
  out << "system,emotion,phoneme,speaker,kld,n_real,n_fake\n";
  for (const auto& [key, cell] : cells.cells) {
    try {
      const auto p = stats::fit_gaussian(cell.real, cfg.cov_mode, cfg.alpha);
      const auto q = stats::fit_gaussian(cell.fake, cfg.cov_mode, cfg.alpha);
      out << corpus::to_string(key.system) << "," << corpus::to_string(key.emotion) << ","
          << key.phoneme << "," << key.speaker << "," << fmt("%.6f", stats::sym_kld(p, q)) << ","
          << cell.real.size() << "," << cell.fake.size() << "\n";
    } catch (const NumericError& e) {
      throw NumericError("cell " + corpus::describe(key) + ": " + e.what());
    }
  }
  return 0;
}

int run_svm_eval(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.resolve();
  const auto cells = load_cells(cfg);
  warn_exclusions(cells.excluded, err);
  out << "system,emotion,phoneme,speaker,accuracy,tp,tn,fp,fn,kkt_gap,converged\n";
  for (const auto& [key, cell] : cells.cells) {
    const auto eval = svm::evaluate_cell(cell, cfg.eval_config(), svm::cell_seed(key, cfg.seed));
    double gap = 0.0;
    bool converged = true;
    for (const auto& m : eval.models) {
      gap = std::max(gap, m.kkt_gap);
      converged = converged && m.converged;
    }
    if (!converged) err << "warning: SMO hit its update cap in " << corpus::describe(key) << "\n";
    out << corpus::to_string(key.system) << "," << corpus::to_string(key.emotion) << ","
        << key.phoneme << "," << key.speaker << "," << fmt("%.4f", eval.accuracy) << ","
        << eval.confusion.tp << "," << eval.confusion.tn << "," << eval.confusion.fp << ","
        << eval.confusion.fn << "," << fmt("%.3g", gap) << "," << (converged ? 1 : 0) << "\n";
  }
  return 0;
}

int run_correlate(const std::string& results, const std::string& format, std::ostream& out,
                  std::ostream& err) {
  const auto rs = report::read_results(results);
  const auto corr = report::correlate_conditions(rs);
  for (const auto& w : corr.warnings) err << "warning: " << w << "\n";
  out << report::render_correlation_table(corr, parse_table_format(format));
  return 0;
}

int run_report(const std::string& results, const std::string& out_dir, const std::string& format,
               std::ostream& out, std::ostream& err) {
  const auto rs = report::read_results(results);
  const auto corr = report::correlate_conditions(rs);
  for (const auto& w : corr.warnings) err << "warning: " << w << "\n";
  for (const auto& p : report::emit_tables(rs, corr, parse_table_format(format),
                                           out_dir.empty() ? results : out_dir)) {
    out << p << "\n";
  }
  return 0;
}

int run_f0(const std::string& wav, const std::string& out_path, const pitch::YinConfig& yin,
           std::ostream& out) {
  const auto wave = pitch::read_wav(wav);
  const auto contour =
      pitch::format_contour(pitch::extract_f0(wave.samples, wave.sample_rate, yin));
  if (out_path.empty()) {
    out << contour;
  } else {
    write_file(out_path, contour);
    out << out_path << "\n";
  }
  return 0;
}

struct SynthFlags {
  std::string out_dir;
  std::string spec_path;
  bool archetypes = false;
  size_t graded = 0;
  uint32_t dim = 8;
  size_t per_class = 200;
  double gap = 0.4;
  double max_gap = 3.0;
  std::optional<uint64_t> seed;
};

int run_synth(const SynthFlags& f, std::ostream& out) {
  uint64_t seed = 0;
  if (const char* env = std::getenv("PHONODIVERGE_SEED"); env && *env) {
    seed = parse_seed(env, "PHONODIVERGE_SEED");
  }
  if (f.seed) seed = *f.seed;
  const int modes = (f.spec_path.empty() ? 0 : 1) + (f.archetypes ? 1 : 0) + (f.graded ? 1 : 0);
  if (modes != 1) throw ValidationError("choose exactly one of --spec, --archetypes, --graded N");
  synth::SynthSpec spec;
  if (!f.spec_path.empty()) {
    spec = synth::parse_spec(read_file(f.spec_path));
    if (f.seed) spec.seed = *f.seed;
  } else if (f.archetypes) {
    spec = synth::archetype_spec(f.dim, f.per_class, f.gap, seed);
  } else {
    spec = synth::graded_spec(f.graded, f.dim, f.per_class, f.max_gap, seed);
  }
  out << synth::gen_synthetic_corpus(spec, f.out_dir) << "\n";
  return 0;
}

int run_fixtures_check(bool strict, std::ostream& out, std::ostream& err) {
  const auto rs = reference::reference_result_set();

  // Printed tables: render from the parsed values and compare cell strings.
  size_t cell_mismatches = 0;
  std::map<std::pair<std::string, report::Condition>, const report::PhonemeCellResult*> by_key;
  for (const auto& row : rs.rows) {
    by_key[{row.key.phoneme, {row.key.system, row.key.emotion, {}}}] = &row;
  }
  const auto cells = reference::printed_cells();
  for (const auto& c : cells) {
    const auto* row = by_key.at({c.phoneme, c.condition});
    if (fmt("%.2f", row->kld) != c.kld || fmt("%.1f", 100.0 * row->accuracy) != c.accuracy) {
      ++cell_mismatches;
      err << "cell mismatch " << c.phoneme << " " << report::condition_name(c.condition) << "\n";
    }
  }
  out << "tables: " << cells.size() << " cells, " << cell_mismatches << " round-trip mismatches\n";

  const auto corr = report::correlate_conditions(rs);
  size_t r_fail = 0;
  size_t p_fail = 0;
  out << "condition,class,r,r_printed,p,p_printed,status\n";
  for (const auto& ref : reference::printed_correlations()) {
    const report::CorrelationResult* got = nullptr;
    for (const auto& row : corr.rows) {
      if (row.condition == ref.condition && row.phoneme_class == ref.phoneme_class) got = &row;
    }
    if (!got) throw ValidationError("no correlation computed for " +
                                    report::condition_name(ref.condition));
    const bool r_ok = std::fabs(got->r - ref.r) <= 0.02;
    const bool p_ok = std::fabs(got->p - ref.p) <= 0.0005 + 1e-12;
    r_fail += r_ok ? 0 : 1;
    p_fail += p_ok ? 0 : 1;
    out << report::condition_name(ref.condition) << "," << report::to_string(ref.phoneme_class)
        << "," << fmt("%.4f", got->r) << "," << fmt("%.2f", ref.r) << "," << fmt("%.4f", got->p)
        << "," << fmt("%.4f", ref.p) << ","
        << (r_ok && p_ok ? "ok" : !r_ok ? "r-mismatch" : "p-mismatch") << "\n";
  }
  out << "correlations: " << r_fail << " r outside 0.02, " << p_fail << " p outside 0.0005\n";
  const bool clean = cell_mismatches == 0 && r_fail == 0 && p_fail == 0;
  if (!clean && strict) return 1;
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phoneme-level real vs. converted speech divergence analysis", "phonodiverge"};
  app.require_subcommand(1);

  RunFlags analyze_flags;
  auto* analyze = app.add_subcommand("analyze", "Full pipeline: cells, KLD, SVM, tables");
  analyze_flags.attach(analyze, true);

  RunFlags kld_flags;
  auto* kld = app.add_subcommand("kld", "Symmetric KLD per cell (CSV on stdout)");
  kld_flags.attach(kld, false);

  RunFlags svm_flags;
  auto* svm_eval = app.add_subcommand("svm-eval", "RBF-SVM accuracy per cell (CSV on stdout)");
  svm_flags.attach(svm_eval, false);

  std::string results_dir;
  std::string table_format = "csv";
  auto* correlate = app.add_subcommand("correlate", "KLD vs accuracy correlation of a run");
  correlate->add_option("--results", results_dir, "Run directory holding results.csv")->required();
  correlate->add_option("--format", table_format, "csv | markdown");

  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Write tables for an existing run");
  report_cmd->add_option("--results", results_dir, "Run directory holding results.csv")->required();
  report_cmd->add_option("--out", report_out, "Table directory (default: the run directory)");
  report_cmd->add_option("--format", table_format, "csv | markdown");

  std::string wav_path;
  std::string f0_out;
  pitch::YinConfig yin;
  auto* f0 = app.add_subcommand("f0", "YIN pitch contour of a 16-bit mono WAV");
  f0->add_option("--wav", wav_path, "Input WAV")->required();
  f0->add_option("--out", f0_out, "Output CSV (default stdout)");
  f0->add_option("--f0-min", yin.f0_min, "Lowest f0 (Hz)");
  f0->add_option("--f0-max", yin.f0_max, "Highest f0 (Hz)");
  f0->add_option("--window", yin.window, "Integration window (s)");
  f0->add_option("--hop", yin.hop, "Frame hop (s)");
  f0->add_option("--threshold", yin.threshold, "CMND threshold");

  SynthFlags synth_flags;
  auto* synth_gen = app.add_subcommand("synth-gen", "Generate a synthetic embedding corpus");
  synth_gen->add_option("--out", synth_flags.out_dir, "Corpus directory")->required();
  synth_gen->add_option("--spec", synth_flags.spec_path, "JSON corpus spec");
  synth_gen->add_flag("--archetypes", synth_flags.archetypes, "Identical / moderate / 6-sigma phonemes");
  synth_gen->add_option("--graded", synth_flags.graded, "N phonemes with linearly growing gaps");
  synth_gen->add_option("--dim", synth_flags.dim, "Embedding dimension");
  synth_gen->add_option("--per-class", synth_flags.per_class, "Segments per class and phoneme");
  synth_gen->add_option("--gap", synth_flags.gap, "Moderate archetype gap per axis");
  synth_gen->add_option("--max-gap", synth_flags.max_gap, "Largest graded gap per axis");
  synth_gen->add_option("--seed", synth_flags.seed, "Seed (falls back to PHONODIVERGE_SEED)");

  bool strict = false;
  auto* fixtures = app.add_subcommand("fixtures-check", "Recompute correlations from the bundled tables");
  fixtures->add_flag("--strict", strict, "Exit 1 when any row is outside tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*analyze) return run_analyze(analyze_flags, out, err);
    if (*kld) return run_kld(kld_flags, out, err);
    if (*svm_eval) return run_svm_eval(svm_flags, out, err);
    if (*correlate) return run_correlate(results_dir, table_format, out, err);
    if (*report_cmd) return run_report(results_dir, report_out, table_format, out, err);
    if (*f0) return run_f0(wav_path, f0_out, yin, out);
    if (*synth_gen) return run_synth(synth_flags, out);
    if (*fixtures) return run_fixtures_check(strict, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 1;
}

}  // namespace phonodiverge
