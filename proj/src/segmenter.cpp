#include "ehrcheck/segmenter.hpp"

#include <algorithm>
#include <regex>
#include <stdexcept>

#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

std::size_t SubText::core_tokens() const {
  std::size_t n = 0;
  for (const auto& l : lines)
    if (l.line_no >= core.first && l.line_no <= core.last) n += count_tokens(l.text);
  return n;
}

std::vector<LineRange> equal_line_split(const std::vector<NoteLine>& prefix, int n) {
  std::vector<LineRange> out;
  const int size = static_cast<int>(prefix.size());
  int start = 0;
  for (int k = 0; k < n; ++k) {
    int end = static_cast<int>((static_cast<long>(size) * (k + 1)) / n);
    out.push_back(LineRange{prefix[start].line_no, prefix[end - 1].line_no});
    start = end;
  }
  return out;
}

std::optional<std::vector<LineRange>> EqualSplitter::split(const std::vector<NoteLine>& prefix, int n) {
  if (static_cast<int>(prefix.size()) < n) return std::nullopt;
  return equal_line_split(prefix, n);
}

bool valid_split(const std::vector<NoteLine>& prefix, const std::vector<LineRange>& ranges, int n) {
  if (static_cast<int>(ranges.size()) != n || prefix.empty()) return false;
  std::size_t pos = 0;
  for (const auto& r : ranges) {
    if (pos >= prefix.size() || r.first != prefix[pos].line_no || r.last < r.first) return false;
    while (pos < prefix.size() && prefix[pos].line_no <= r.last) ++pos;
    if (prefix[pos - 1].line_no != r.last) return false;
  }
  return pos == prefix.size();
}

std::optional<std::vector<LineRange>> parse_section_ranges(std::string_view answer) {
  auto close = answer.rfind(']');
  if (close == std::string_view::npos) return std::nullopt;
  auto open = answer.rfind('[', close);
  if (open == std::string_view::npos) return std::nullopt;
  std::string body(answer.substr(open + 1, close - open - 1));
  static const std::regex entry(R"(^\s*section\s*(\d+)\s*:\s*(\d+)\s*-\s*(\d+)\s*$)", std::regex::icase);
  std::vector<LineRange> out;
  int expect = 1;
  for (const auto& part : split(body, ',')) {
    std::smatch m;
    if (!std::regex_match(part, m, entry)) return std::nullopt;
    if (std::stoi(m[1]) != expect++) return std::nullopt;
    out.push_back(LineRange{std::stoi(m[2]), std::stoi(m[3])});
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::string format_section_ranges(const std::vector<LineRange>& ranges) {
  std::string s = "[";
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (i) s += ", ";
    s += "section" + std::to_string(i + 1) + ": " + std::to_string(ranges[i].first) + "-" + std::to_string(ranges[i].last);
  }
  return s + "]";
}

namespace {

struct Core {
  std::size_t begin, end;  // indexes into the note's lines, end exclusive
  bool oversized = false;
};

}  // namespace

SegmentResult segment(const Note& note, const SegmentOptions& opts, Splitter& splitter) {
  if (opts.max_tokens < 1) throw std::invalid_argument("segment: l must be >= 1");
  if (opts.splits < 2) throw std::invalid_argument("segment: n must be >= 2");
  SegmentResult result;
  const auto& lines = note.lines;
  std::vector<std::size_t> tokens(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) tokens[i] = count_tokens(lines[i].text);
  std::size_t remaining_tokens = 0;
  for (auto t : tokens) remaining_tokens += t;

  const auto l = static_cast<std::size_t>(opts.max_tokens);
  std::vector<Core> cores;
  std::size_t pos = 0;
  while (remaining_tokens > l) {
    ++result.rounds;
    std::size_t end = pos, acc = 0;
    while (end < lines.size() && acc + tokens[end] <= l) acc += tokens[end++];
    if (end == pos) {
      cores.push_back(Core{pos, pos + 1, true});
      result.log.push_back("line " + std::to_string(lines[pos].line_no) + " exceeds the token limit; kept whole");
      remaining_tokens -= tokens[pos];
      ++pos;
      continue;
    }
    std::vector<NoteLine> prefix(lines.begin() + static_cast<long>(pos), lines.begin() + static_cast<long>(end));
    const int k = std::min<int>(opts.splits, static_cast<int>(prefix.size()));
    if (k < 2) {
      cores.push_back(Core{pos, end});
      remaining_tokens -= acc;
      pos = end;
      continue;
    }
    auto ranges = splitter.split(prefix, k);
    if (!ranges || !valid_split(prefix, *ranges, k)) {
      ++result.fallbacks;
      result.log.push_back("round " + std::to_string(result.rounds) + ": splitter answer rejected, equal split used");
      ranges = equal_line_split(prefix, k);
    }
    // Keep parts 1..k-1; part k goes back to the remainder.
    for (int r = 0; r + 1 < k; ++r) {
      std::size_t b = pos;
      while (pos < lines.size() && lines[pos].line_no <= (*ranges)[r].last) remaining_tokens -= tokens[pos++];
      cores.push_back(Core{b, pos});
    }
  }
  if (pos < lines.size()) cores.push_back(Core{pos, lines.size()});

  for (std::size_t i = 0; i < cores.size(); ++i) {
    const auto& c = cores[i];
    std::size_t fb = c.begin, fe = c.end;
    int pre = 0, post = 0;
    if (opts.overlap_tokens > 0) {
      if (i > 0)
        while (fb > 0 && pre < opts.overlap_tokens) pre += static_cast<int>(tokens[--fb]);
      if (i + 1 < cores.size())
        while (fe < lines.size() && post < opts.overlap_tokens) post += static_cast<int>(tokens[fe++]);
    }
    SubText s;
    s.parent_note_id = note.note_id;
    s.index = static_cast<int>(i);
    s.core = LineRange{lines[c.begin].line_no, lines[c.end - 1].line_no};
    s.full = LineRange{lines[fb].line_no, lines[fe - 1].line_no};
    s.lines.assign(lines.begin() + static_cast<long>(fb), lines.begin() + static_cast<long>(fe));
    for (std::size_t k = 0; k < s.lines.size(); ++k) s.text += (k ? "\n" : "") + s.lines[k].text;
    s.overlap_prefix_tokens = pre;
    s.overlap_suffix_tokens = post;
    s.oversized = c.oversized;
    result.subtexts.push_back(std::move(s));
  }
  return result;
}

}  // namespace ehrcheck
