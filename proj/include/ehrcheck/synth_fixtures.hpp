#pragma once

// Synthetic EHR databases, paired notes, scripted backend answers and gold
// labels with controlled inconsistency injection.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehrcheck/evaluator.hpp"
#include "ehrcheck/query_engine.hpp"
#include "ehrcheck/record_store.hpp"
#include "ehrcheck/segmenter.hpp"

namespace ehrcheck {

/// Seeded generator shared by the fixture and random-store code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Inclusive range.
  int uniform(int lo, int hi);
  double real(double lo, double hi);
  bool chance(double p);
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v.at(static_cast<std::size_t>(uniform(0, static_cast<int>(v.size()) - 1)));
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(uniform(0, static_cast<int>(i) - 1))]);
  }

 private:
  std::mt19937_64 engine_;
};

enum class ErrorClass { TimeShift, ValuePerturb, UnitSwap, MissingEntity, Compound };
std::string_view to_string(ErrorClass c);

struct InjectionSpec {
  std::uint64_t seed = 7;
  int notes = 24;
  int entities_per_note = 10;
  int time_shift = 12;
  int value_perturb = 12;
  int unit_swap = 10;
  int missing_entity = 10;
  int compound = 4;
  /// Hours added to exact-timestamp entities, cycled. Time-shift targets
  /// alternate between exact timestamps and day-level times, exact first.
  std::vector<int> time_shift_hours{1, 3, 6};
  /// Weights for discharge summaries, physician notes and nursing notes.
  std::array<int, 3> category_mix{1, 1, 1};
  int type3_per_note = 1;
  int distractor_admissions = 4;
  SegmentOptions segment;

  int total_injections() const { return time_shift + value_perturb + unit_swap + missing_entity + compound; }
  /// Throws std::invalid_argument for negative counts or more errors than
  /// entities.
  void validate() const;
};

struct Injection {
  std::string note_id;
  std::string surface;
  int line_no = 0;
  ErrorClass error = ErrorClass::TimeShift;
  int hours = 0;  // exact-timestamp time shifts
  std::vector<ColumnRef> columns;
};

struct FixtureSet {
  ProfileName profile = ProfileName::MimicStyle;
  RecordStore store;
  std::vector<Note> notes;
  nlohmann::json script;
  std::vector<GoldRecord> gold;
  std::vector<Injection> injections;
  /// "noteId/surface@line" of gold entities whose plan conditions all have
  /// a counterpart in the OMOP profile.
  std::set<std::string> omop_survivors;
};

/// Deterministic for a fixed spec. Throws std::invalid_argument when the
/// spec cannot be satisfied.
FixtureSet generate(const InjectionSpec& spec, ProfileName profile);

/// db/<table>.csv, notes.jsonl, script.json, gold.jsonl, injections.json.
void write_fixtures(const FixtureSet& fx, const std::filesystem::path& dir);

/// Copies a frozen MIMIC-style store into OMOP-style tables following the
/// standard column mapping. Dictionary labels become concepts whose domain
/// follows the event table that uses them.
RecordStore migrate_to_omop(const RecordStore& mimic);

/// A frozen store of about `rows` event rows spread over every event table,
/// with nulls, shared values and interval rows, for path-equivalence tests.
RecordStore random_store(ProfileName profile, int rows, std::uint64_t seed);
/// A random checked plan for one template, with literals drawn mostly from
/// stored rows so that both hits and misses occur.
QueryPlan random_plan(const RecordStore& store, const TemplateSpec& tmpl, Rng& rng);
QueryPlan random_plan(const RecordStore& store, Rng& rng);

}  // namespace ehrcheck
