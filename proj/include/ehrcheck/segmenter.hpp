#pragma once

// Iterative note segmentation into sub-texts of at most l tokens, with
// whole-line overlap at internal boundaries.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehrcheck/notes.hpp"

namespace ehrcheck {

struct SubText {
  std::string parent_note_id;
  int index = 0;
  /// Lines owned by this sub-text; cores partition the note.
  LineRange core;
  /// Core plus overlap lines.
  LineRange full;
  std::vector<NoteLine> lines;  // the full range
  std::string text;             // lines of the full range joined with '\n'
  int overlap_prefix_tokens = 0;
  int overlap_suffix_tokens = 0;
  /// A single line longer than l tokens; kept whole.
  bool oversized = false;

  std::size_t core_tokens() const;
};

/// Splits a prefix (a list of consecutive note lines) into `n` topic parts.
class Splitter {
 public:
  virtual ~Splitter() = default;
  /// Returns n line ranges, or nullopt when no usable answer is available.
  virtual std::optional<std::vector<LineRange>> split(const std::vector<NoteLine>& prefix, int n) = 0;
};

/// Equal line-count split; also the fallback for invalid splitter output.
class EqualSplitter : public Splitter {
 public:
  std::optional<std::vector<LineRange>> split(const std::vector<NoteLine>& prefix, int n) override;
};

std::vector<LineRange> equal_line_split(const std::vector<NoteLine>& prefix, int n);

struct SegmentOptions {
  int max_tokens = 1000;  // l
  int splits = 3;         // n
  int overlap_tokens = 50;
};

struct SegmentResult {
  std::vector<SubText> subtexts;
  int rounds = 0;
  /// Rounds where the splitter answer was rejected and the equal split used.
  int fallbacks = 0;
  std::vector<std::string> log;
};

/// Throws std::invalid_argument if l < 1 or n < 2.
SegmentResult segment(const Note& note, const SegmentOptions& opts, Splitter& splitter);

/// True if `ranges` are exactly n nonempty ranges that cover `prefix` in
/// order without gaps.
bool valid_split(const std::vector<NoteLine>& prefix, const std::vector<LineRange>& ranges, int n);

/// Parses "[section1: 44-59, section2: 60-69, section3: 70-73]", optionally
/// wrapped in parentheses or preceded by other text. Returns nullopt for
/// anything else.
std::optional<std::vector<LineRange>> parse_section_ranges(std::string_view answer);
std::string format_section_ranges(const std::vector<LineRange>& ranges);

}  // namespace ehrcheck
