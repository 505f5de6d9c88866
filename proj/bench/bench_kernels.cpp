// Serial reference vs OpenMP kernel timings.

#include <benchmark/benchmark.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <unistd.h>

#include "phonodiverge/corpus.hpp"
#include "phonodiverge/pitch.hpp"
#include "phonodiverge/report.hpp"
#include "phonodiverge/synth.hpp"

using namespace phonodiverge;
namespace fs = std::filesystem;

namespace {

std::vector<double> tone(size_t n) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    x[i] = 0.4 * std::sin(2 * std::numbers::pi * 180 * t) + 0.1 * std::sin(2 * std::numbers::pi * 360 * t);
  }
  return x;
}

// One synthetic corpus shared by the corpus-level benchmarks.
struct Fixture {
  fs::path dir;
  std::vector<corpus::UtteranceRecord> records;
  corpus::CellSet cells;

  Fixture() : dir(fs::temp_directory_path() / ("phonodiverge_bench_" + std::to_string(::getpid()))) {
    auto spec = synth::graded_spec(12, 16, 120, 2.0, 1);
    spec.emotions = {corpus::Emotion::kAngry, corpus::Emotion::kSad};
    spec.systems = {corpus::System::kEvc1, corpus::System::kEvc2};
    const auto manifest = synth::gen_synthetic_corpus(spec, dir.string());
    records = corpus::read_manifest(manifest);
    cells = corpus::build_cells(records, {});
  }
  ~Fixture() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_YinSerial(benchmark::State& state) {
  const auto x = tone(static_cast<size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pitch::extract_f0_serial(x, 16000.0));
}

void BM_YinParallel(benchmark::State& state) {
  const auto x = tone(static_cast<size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pitch::extract_f0(x, 16000.0));
}

void BM_SegmentsSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(corpus::extract_all_segments_serial(f.records, {}));
}

void BM_SegmentsParallel(benchmark::State& state) {
  const auto& f = fixture();
  corpus::CellOptions opt;
  opt.jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(corpus::extract_all_segments(f.records, opt));
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto& f = fixture();
  const RunConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(report::evaluate_cells_serial(f.cells, cfg));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const auto& f = fixture();
  RunConfig cfg;
  cfg.jobs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(report::evaluate_cells(f.cells, cfg));
}

}  // namespace

BENCHMARK(BM_YinSerial)->Arg(16000 * 5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_YinParallel)->Arg(16000 * 5)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SegmentsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SegmentsParallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
