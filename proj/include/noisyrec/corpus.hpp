#pragma once

// Clickstream ingestion, benchmark preprocessing, and the bundle file format.

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyrec/checksum.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/tensor.hpp"

namespace noisyrec {

using ItemIndex = std::uint32_t;
using TimeMs = std::int64_t;

inline constexpr TimeMs kMsPerDay = 86'400'000;

// -- types -------------------------------------------------------------------

struct RawEvent {
  std::string session_key;
  TimeMs timestamp = 0;  // UTC, milliseconds since epoch
  std::string item_key;
  std::int64_t order_key = 0;  // within-session ordering (timestamp or dataset-specific)

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

struct ItemVocab {
  std::unordered_map<std::string, ItemIndex> raw_to_index;
  std::vector<std::string> index_to_raw;
  std::vector<std::uint64_t> train_popularity;

  std::size_t size() const noexcept { return index_to_raw.size(); }

  ItemIndex add(const std::string& raw) {
    auto [it, inserted] = raw_to_index.emplace(raw, static_cast<ItemIndex>(index_to_raw.size()));
    if (inserted) {
      index_to_raw.push_back(raw);
      train_popularity.push_back(0);
    }
    return it->second;
  }

  std::optional<ItemIndex> find(const std::string& raw) const {
    auto it = raw_to_index.find(raw);
    if (it == raw_to_index.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const ItemVocab& a, const ItemVocab& b) {
    return a.index_to_raw == b.index_to_raw && a.train_popularity == b.train_popularity;
  }
};

struct Session {
  std::int64_t id = 0;
  std::vector<ItemIndex> items;
  TimeMs start_time = 0;
  TimeMs end_time = 0;  // last click; decides the train/test side
};

struct SplitExample {
  std::vector<ItemIndex> prefix;
  ItemIndex target = 0;

  friend bool operator==(const SplitExample&, const SplitExample&) = default;
  friend auto operator<=>(const SplitExample&, const SplitExample&) = default;
};

/// Train examples are stored in chronological order of their source session.
struct DatasetBundle {
  ItemVocab vocab;
  std::vector<SplitExample> train;
  std::vector<SplitExample> test;
  nlohmann::json provenance = nlohmann::json::object();

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// -- time parsing ------------------------------------------------------------

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::none_of(key.begin(), key.end(),
                      [](char c) { return c == ' ' || c == '\t' || c == '|' || c == '\n' || c == '\r'; });
}

}  // namespace detail

/// Parses "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[.fff][Z]" as UTC milliseconds.
inline std::optional<TimeMs> parse_utc(std::string_view s) {
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned mo = 0, d = 0;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), mo) ||
      !detail::parse_int(s.substr(8, 2), d))
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  TimeMs ms = detail::days_from_civil(y, mo, d) * kMsPerDay;
  if (s.size() == 10) return ms;
  if (s.size() < 19 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':') return std::nullopt;
  unsigned hh = 0, mm = 0, ss = 0;
  if (!detail::parse_int(s.substr(11, 2), hh) || !detail::parse_int(s.substr(14, 2), mm) ||
      !detail::parse_int(s.substr(17, 2), ss) || hh > 23 || mm > 59 || ss > 60)
    return std::nullopt;
  ms += (hh * 3600 + mm * 60 + ss) * 1000LL;
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t n = 1;
    while (n < rest.size() && rest[n] >= '0' && rest[n] <= '9') ++n;
    std::string_view frac = rest.substr(1, n - 1);
    if (frac.empty()) return std::nullopt;
    int scale = 100;
    for (std::size_t i = 0; i < frac.size() && i < 3; ++i, scale /= 10) ms += (frac[i] - '0') * scale;
    rest = rest.substr(n);
  }
  if (rest == "Z" || rest.empty()) return ms;
  return std::nullopt;
}

// -- ingest ------------------------------------------------------------------

enum class SourceFormat { yoochoose, diginetica };

inline SourceFormat parse_format(std::string_view name) {
  if (name == "yoochoose") return SourceFormat::yoochoose;
  if (name == "diginetica") return SourceFormat::diginetica;
  throw Error("unknown source format '" + std::string(name) + "'");
}

inline std::string format_name(SourceFormat f) { return f == SourceFormat::yoochoose ? "yoochoose" : "diginetica"; }

struct IngestResult {
  std::vector<RawEvent> events;
  std::size_t malformed_rows = 0;
  std::vector<std::size_t> malformed_lines;  // first few 1-based line numbers
};

/// Parses one data row; nullopt when malformed.
inline std::optional<RawEvent> parse_row(std::string_view line, SourceFormat format) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (format == SourceFormat::yoochoose) {
    auto f = detail::split(line, ',');
    if (f.size() != 4 || !detail::valid_key(f[0]) || !detail::valid_key(f[2])) return std::nullopt;
    auto ts = parse_utc(f[1]);
    if (!ts) return std::nullopt;
    return RawEvent{std::string(f[0]), *ts, std::string(f[2]), *ts};
  }
  auto f = detail::split(line, ';');
  if (f.size() != 5 || !detail::valid_key(f[0]) || !detail::valid_key(f[2])) return std::nullopt;
  std::int64_t timeframe = 0;
  if (!detail::parse_int(f[3], timeframe)) return std::nullopt;
  auto day = parse_utc(f[4]);
  if (!day) return std::nullopt;
  return RawEvent{std::string(f[0]), *day, std::string(f[2]), timeframe};
}

inline IngestResult ingest_stream(std::istream& in, SourceFormat format) {
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (format == SourceFormat::diginetica && lineno == 1 && line.rfind("sessionId", 0) == 0) continue;
    if (auto ev = parse_row(line, format)) {
      result.events.push_back(std::move(*ev));
    } else {
      ++result.malformed_rows;
      if (result.malformed_lines.size() < 20) result.malformed_lines.push_back(lineno);
    }
  }
  return result;
}

inline IngestResult ingest(const std::string& path, SourceFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path + "'");
  return ingest_stream(in, format);
}

// -- preprocessing -----------------------------------------------------------

struct PreprocessOptions {
  std::size_t min_item_support = 5;
  TimeMs test_window = kMsPerDay;
};

struct PreparedSessions {
  DatasetBundle bundle;
  std::vector<Session> train_sessions;  // chronological
  std::vector<Session> test_sessions;
};

/// Expands (s1..sL) into the L-1 examples (s1..s_{k-1}) -> s_k.
inline void split_session(const std::vector<ItemIndex>& items, std::vector<SplitExample>& out) {
  for (std::size_t k = 1; k < items.size(); ++k)
    out.push_back(SplitExample{{items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k)}, items[k]});
}

/// Event counts recovered from chronologically stored examples. A new chunk
/// starts whenever an example does not extend its predecessor by one click;
/// the whole prefix of a chunk's first example is counted, then every target.
inline std::vector<std::uint64_t> popularity_from_examples(const std::vector<SplitExample>& examples,
                                                           std::size_t n_items) {
  std::vector<std::uint64_t> pop(n_items, 0);
  const SplitExample* prev = nullptr;
  for (const auto& ex : examples) {
    bool continues = prev && ex.prefix.size() == prev->prefix.size() + 1 &&
                     std::equal(prev->prefix.begin(), prev->prefix.end(), ex.prefix.begin()) &&
                     ex.prefix.back() == prev->target;
    if (!continues)
      for (ItemIndex i : ex.prefix) ++pop[i];
    ++pop[ex.target];
    prev = &ex;
  }
  return pop;
}

inline PreparedSessions preprocess_sessions(const std::vector<RawEvent>& events,
                                            const PreprocessOptions& opts = {}) {
  if (opts.min_item_support < 1) throw Error("preprocess: min_item_support must be >= 1");
  if (opts.test_window <= 0) throw Error("preprocess: test_window must be positive");

  // group by session key in first-seen order, then order clicks within each session
  struct Group {
    std::string key;
    std::vector<std::size_t> rows;
  };
  std::vector<Group> groups;
  {
    std::unordered_map<std::string, std::size_t> by_key;
    for (std::size_t i = 0; i < events.size(); ++i) {
      auto [it, inserted] = by_key.emplace(events[i].session_key, groups.size());
      if (inserted) groups.push_back({events[i].session_key, {}});
      groups[it->second].rows.push_back(i);
    }
  }
  struct Work {
    std::int64_t id;
    std::vector<std::string> items;
    TimeMs start, end;
  };
  std::vector<Work> work;
  work.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& rows = groups[g].rows;
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return events[a].order_key < events[b].order_key; });
    Work w{static_cast<std::int64_t>(g), {}, events[rows.front()].timestamp, events[rows.front()].timestamp};
    for (std::size_t r : rows) {
      w.items.push_back(events[r].item_key);
      w.start = std::min(w.start, events[r].timestamp);
      w.end = std::max(w.end, events[r].timestamp);
    }
    work.push_back(std::move(w));
  }

  // drop short sessions and rare items until neither filter changes anything
  const std::size_t n_sessions_in = work.size();
  for (;;) {
    std::erase_if(work, [](const Work& w) { return w.items.size() < 2; });
    std::unordered_map<std::string, std::size_t> support;
    for (const auto& w : work)
      for (const auto& it : w.items) ++support[it];
    bool changed = false;
    for (auto& w : work) {
      const auto before = w.items.size();
      std::erase_if(w.items, [&](const std::string& it) { return support[it] < opts.min_item_support; });
      changed = changed || w.items.size() != before;
    }
    if (!changed) break;
  }
  if (work.empty())
    throw Error("preprocess: all " + std::to_string(n_sessions_in) + " sessions (" + std::to_string(events.size()) +
                " events) were filtered out");

  TimeMs max_time = work.front().end;
  for (const auto& w : work) max_time = std::max(max_time, w.end);
  const TimeMs day_index = max_time / kMsPerDay - (max_time % kMsPerDay < 0 ? 1 : 0);
  const TimeMs cut = (day_index + 1) * kMsPerDay - opts.test_window;

  std::vector<Work> train_w, test_w;
  for (auto& w : work) (w.end >= cut ? test_w : train_w).push_back(std::move(w));
  auto chrono = [](const Work& a, const Work& b) { return std::tie(a.start, a.id) < std::tie(b.start, b.id); };
  std::sort(train_w.begin(), train_w.end(), chrono);
  std::sort(test_w.begin(), test_w.end(), chrono);
  if (train_w.empty())
    throw Error("preprocess: no training sessions before the test cut (" + std::to_string(work.size()) +
                " sessions retained)");

  PreparedSessions out;
  ItemVocab& vocab = out.bundle.vocab;
  std::uint64_t train_events = 0;
  for (const auto& w : train_w) {
    Session s{w.id, {}, w.start, w.end};
    for (const auto& raw : w.items) {
      const ItemIndex idx = vocab.add(raw);
      ++vocab.train_popularity[idx];
      s.items.push_back(idx);
    }
    train_events += s.items.size();
    split_session(s.items, out.bundle.train);
    out.train_sessions.push_back(std::move(s));
  }
  std::size_t dropped_test_items = 0, dropped_test_sessions = 0;
  for (const auto& w : test_w) {
    Session s{w.id, {}, w.start, w.end};
    for (const auto& raw : w.items) {
      if (auto idx = vocab.find(raw))
        s.items.push_back(*idx);
      else
        ++dropped_test_items;
    }
    if (s.items.size() < 2) {
      ++dropped_test_sessions;
      continue;
    }
    split_session(s.items, out.bundle.test);
    out.test_sessions.push_back(std::move(s));
  }

  out.bundle.provenance = {
      {"min_item_support", opts.min_item_support},
      {"test_window_ms", opts.test_window},
      {"test_cut_ms", cut},
      {"input_events", events.size()},
      {"input_sessions", n_sessions_in},
      {"train_sessions", out.train_sessions.size()},
      {"test_sessions", out.test_sessions.size()},
      {"train_events", train_events},
      {"test_items_dropped", dropped_test_items},
      {"test_sessions_dropped", dropped_test_sessions},
      {"n_items", vocab.size()},
      {"n_train", out.bundle.train.size()},
      {"n_test", out.bundle.test.size()},
      {"steps", nlohmann::json::array({"preprocess"})},
  };
  return out;
}

inline DatasetBundle preprocess(const std::vector<RawEvent>& events, const PreprocessOptions& opts = {}) {
  return preprocess_sessions(events, opts).bundle;
}

/// Re-serializes prepared sessions as events: first click at start_time, last
/// at end_time, intermediate clicks at start_time, ordered by position.
inline std::vector<RawEvent> events_from_sessions(const PreparedSessions& prepared) {
  std::vector<RawEvent> out;
  auto emit = [&](const Session& s) {
    for (std::size_t k = 0; k < s.items.size(); ++k) {
      const TimeMs t = k + 1 == s.items.size() ? s.end_time : s.start_time;
      out.push_back(RawEvent{std::to_string(s.id), t, prepared.bundle.vocab.index_to_raw[s.items[k]],
                             static_cast<std::int64_t>(k)});
    }
  };
  for (const auto& s : prepared.train_sessions) emit(s);
  for (const auto& s : prepared.test_sessions) emit(s);
  return out;
}

namespace detail {

inline void set_counts(DatasetBundle& b) {
  b.provenance["n_items"] = b.vocab.size();
  b.provenance["n_train"] = b.train.size();
  b.provenance["n_test"] = b.test.size();
}

inline void append_step(DatasetBundle& b, const std::string& step) {
  if (!b.provenance.contains("steps")) b.provenance["steps"] = nlohmann::json::array();
  b.provenance["steps"].push_back(step);
}

}  // namespace detail

/// Keeps the most recent floor(n_train / denominator) train examples and
/// re-filters vocabulary and test set to the retained train items.
inline DatasetBundle subset_fraction(const DatasetBundle& bundle, std::size_t denominator) {
  if (denominator < 1) throw Error("subset_fraction: denominator must be >= 1");
  if (denominator > bundle.train.size())
    throw Error("subset_fraction: denominator " + std::to_string(denominator) + " exceeds train size " +
                std::to_string(bundle.train.size()));
  const std::size_t keep = bundle.train.size() / denominator;
  std::vector<SplitExample> kept(bundle.train.end() - static_cast<std::ptrdiff_t>(keep), bundle.train.end());

  const std::size_t n_old = bundle.vocab.size();
  std::vector<bool> present(n_old, false);
  for (const auto& ex : kept) {
    present[ex.target] = true;
    for (ItemIndex i : ex.prefix) present[i] = true;
  }
  constexpr ItemIndex kAbsent = ~ItemIndex{0};
  std::vector<ItemIndex> remap(n_old, kAbsent);
  DatasetBundle out;
  for (std::size_t i = 0; i < n_old; ++i) {
    if (!present[i]) continue;
    remap[i] = out.vocab.add(bundle.vocab.index_to_raw[i]);
  }
  for (auto& ex : kept) {
    for (ItemIndex& i : ex.prefix) i = remap[i];
    ex.target = remap[ex.target];
  }
  out.vocab.train_popularity = popularity_from_examples(kept, out.vocab.size());
  out.train = std::move(kept);

  std::size_t dropped = 0;
  for (const auto& ex : bundle.test) {
    SplitExample t;
    for (ItemIndex i : ex.prefix)
      if (remap[i] != kAbsent) t.prefix.push_back(remap[i]);
    if (t.prefix.empty() || remap[ex.target] == kAbsent) {
      ++dropped;
      continue;
    }
    t.target = remap[ex.target];
    out.test.push_back(std::move(t));
  }
  out.provenance = bundle.provenance;
  out.provenance["subset_denominator"] = denominator;
  out.provenance["subset_test_examples_dropped"] = dropped;
  detail::append_step(out, "subset_fraction");
  detail::set_counts(out);
  return out;
}

/// Sizes of the four popularity quartiles over n items; the remainder goes to
/// the earlier quartiles.
inline std::array<std::size_t, 4> quartile_sizes(std::size_t n) {
  std::array<std::size_t, 4> s{};
  for (std::size_t q = 0; q < 4; ++q) s[q] = n / 4 + (q < n % 4 ? 1 : 0);
  return s;
}

struct ImbalanceResult {
  std::vector<RawEvent> events;
  std::vector<std::string> removed_items;
  std::size_t first_quartile_size = 0;
};

/// Removes a seeded random `removal_ratio` share of the most popular quartile
/// of items (by event count; ties by raw key) together with all their events.
inline ImbalanceResult imbalance_detailed(const std::vector<RawEvent>& events, double removal_ratio,
                                          std::uint64_t seed) {
  if (!(removal_ratio >= 0.0 && removal_ratio <= 1.0)) throw Error("imbalance: removal_ratio must be in [0, 1]");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& e : events) ++counts[e.item_key];
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  ImbalanceResult out;
  out.first_quartile_size = quartile_sizes(ranked.size())[0];
  std::vector<std::string> q1;
  for (std::size_t i = 0; i < out.first_quartile_size; ++i) q1.push_back(ranked[i].first);
  const auto n_remove = static_cast<std::size_t>(std::floor(removal_ratio * static_cast<double>(q1.size())));
  Rng rng(seed);
  for (std::size_t i = 0; i < n_remove; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(q1.size() - i));
    std::swap(q1[i], q1[j]);
  }
  out.removed_items.assign(q1.begin(), q1.begin() + static_cast<std::ptrdiff_t>(n_remove));
  std::unordered_set<std::string> removed(out.removed_items.begin(), out.removed_items.end());
  for (const auto& e : events)
    if (!removed.contains(e.item_key)) out.events.push_back(e);
  return out;
}

inline std::vector<RawEvent> imbalance(const std::vector<RawEvent>& events, double removal_ratio,
                                       std::uint64_t seed) {
  return imbalance_detailed(events, removal_ratio, seed).events;
}

// -- bundle file -------------------------------------------------------------

inline constexpr int kBundleVersion = 1;

inline std::string bundle_body(const DatasetBundle& b) {
  std::string body;
  for (std::size_t i = 0; i < b.vocab.size(); ++i)
    body += "V " + b.vocab.index_to_raw[i] + " " + std::to_string(b.vocab.train_popularity[i]) + "\n";
  auto line = [&](char tag, const SplitExample& ex) {
    body += tag;
    body += ' ';
    for (std::size_t k = 0; k < ex.prefix.size(); ++k) {
      if (k) body += ' ';
      body += std::to_string(ex.prefix[k]);
    }
    body += '|';
    body += std::to_string(ex.target);
    body += '\n';
  };
  for (const auto& ex : b.train) line('T', ex);
  for (const auto& ex : b.test) line('E', ex);
  return body;
}

inline std::string serialize_bundle(const DatasetBundle& b) {
  const std::string body = bundle_body(b);
  nlohmann::json header = {{"format", "noisyrec-bundle"},
                           {"version", kBundleVersion},
                           {"n_items", b.vocab.size()},
                           {"n_train", b.train.size()},
                           {"n_test", b.test.size()},
                           {"provenance", b.provenance},
                           {"checksum", fnv1a_hex(body)}};
  return header.dump() + "\n" + body;
}

inline void save_bundle(const DatasetBundle& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write bundle '" + path + "'");
  out << serialize_bundle(b);
  if (!out) throw Error("failed writing bundle '" + path + "'");
}

inline DatasetBundle parse_bundle(const std::string& text, const std::string& origin = "<memory>") {
  const std::size_t nl = text.find('\n');
  if (nl == std::string::npos) throw Error("bundle '" + origin + "': missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bundle '" + origin + "': malformed header: " + e.what());
  }
  if (header.value("format", "") != "noisyrec-bundle")
    throw Error("bundle '" + origin + "': not a bundle file");
  if (header.value("version", 0) != kBundleVersion)
    throw Error("bundle '" + origin + "': version mismatch (file " + std::to_string(header.value("version", 0)) +
                ", expected " + std::to_string(kBundleVersion) + ")");
  const std::string_view body(text.data() + nl + 1, text.size() - nl - 1);
  if (fnv1a_hex(body) != header.at("checksum").get<std::string>())
    throw Error("bundle '" + origin + "': checksum mismatch (file truncated or modified)");

  DatasetBundle b;
  b.provenance = header.at("provenance");
  std::size_t pos = 0, lineno = 1;
  auto fail = [&](const std::string& why) {
    throw Error("bundle '" + origin + "': line " + std::to_string(lineno) + ": " + why);
  };
  auto parse_example = [&](std::string_view rest) {
    const auto bar = rest.find('|');
    if (bar == std::string_view::npos) fail("missing '|'");
    SplitExample ex;
    for (auto tok : detail::split(rest.substr(0, bar), ' ')) {
      ItemIndex v = 0;
      if (!detail::parse_int(tok, v) || v >= b.vocab.size()) fail("bad item index");
      ex.prefix.push_back(v);
    }
    if (!detail::parse_int(rest.substr(bar + 1), ex.target) || ex.target >= b.vocab.size()) fail("bad target");
    return ex;
  };
  while (pos < body.size()) {
    ++lineno;
    std::size_t end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    std::string_view line = body.substr(pos, end - pos);
    pos = end + 1;
    if (line.size() < 2 || line[1] != ' ') fail("malformed line");
    std::string_view rest = line.substr(2);
    switch (line[0]) {
      case 'V': {
        const auto sp = rest.rfind(' ');
        std::uint64_t pop = 0;
        if (sp == std::string_view::npos || !detail::parse_int(rest.substr(sp + 1), pop)) fail("bad vocab line");
        const std::string raw(rest.substr(0, sp));
        if (b.vocab.find(raw)) fail("duplicate vocabulary key");
        b.vocab.train_popularity[b.vocab.add(raw)] = pop;
        break;
      }
      case 'T':
        b.train.push_back(parse_example(rest));
        break;
      case 'E':
        b.test.push_back(parse_example(rest));
        break;
      default:
        fail("unknown record tag");
    }
  }
  if (b.vocab.size() != header.at("n_items").get<std::size_t>() ||
      b.train.size() != header.at("n_train").get<std::size_t>() ||
      b.test.size() != header.at("n_test").get<std::size_t>())
    throw Error("bundle '" + origin + "': record counts disagree with header");
  return b;
}

inline DatasetBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read bundle '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_bundle(text, path);
}

}  // namespace noisyrec
