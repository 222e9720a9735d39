// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "ehrcheck/item_search.hpp"
#include "ehrcheck/synth_fixtures.hpp"

using namespace ehrcheck;

namespace {

const RecordStore& store() {
  static RecordStore s = random_store(ProfileName::MimicStyle, 200000, 11);
  return s;
}

std::vector<QueryPlan> plans() {
  Rng rng(3);
  std::vector<QueryPlan> out;
  for (const auto& t : template_matrix(ProfileName::MimicStyle))
    if (t.event_table == "chartevents" || t.event_table == "labevents") out.push_back(random_plan(store(), t, rng));
  return out;
}

void BM_Scan(benchmark::State& state) {
  static const auto ps = plans();
  const bool parallel = state.range(0) != 0;
  for (auto _ : state)
    for (const auto& p : ps) benchmark::DoNotOptimize(store().scan(p, parallel));
  state.SetLabel(parallel ? "openmp" : "serial");
}
BENCHMARK(BM_Scan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SqlPath(benchmark::State& state) {
  static const auto ps = plans();
  for (auto _ : state)
    for (const auto& p : ps) benchmark::DoNotOptimize(store().execute_plan(p, ExecPath::SqlPath));
}
BENCHMARK(BM_SqlPath)->Unit(benchmark::kMillisecond);

void BM_ItemSearch(benchmark::State& state) {
  static const auto fx = generate(InjectionSpec{}, ProfileName::MimicStyle);
  static const ItemIndex index(fx.store);
  static const auto lex = ExpansionLexicon::bundled();
  ItemSearchOptions opts;
  opts.parallel = state.range(0) != 0;
  const std::vector<std::string> terms{"HR", "temp", "Hgb", "lasix", "K", "blood culture", "norepi", "UOP"};
  for (auto _ : state)
    for (const auto& t : terms) benchmark::DoNotOptimize(index.search(t, lex, opts));
  state.SetLabel(opts.parallel ? "openmp" : "serial");
}
BENCHMARK(BM_ItemSearch)->Arg(0)->Arg(1);

void BM_BigramCosine(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(bigram_cosine("Arterial Blood Pressure systolic", "ABP systolic"));
}
BENCHMARK(BM_BigramCosine);

}  // namespace

BENCHMARK_MAIN();
