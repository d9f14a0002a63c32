#pragma once

// Time-tag data model, tag/histogram file formats, delay histograms and the
// heralded g2(0) estimator.
//
// Binary tag file (all integers little-endian):
//   header  16 bytes: "HTAG" | version u16 | reserved u16 | record count u64
//   record   9 bytes: channel u8 (0 herald, 1 fluorescence) | timestamp i64 ps
// CSV tag file: header "channel,timestamp_ps", one tag per line.
// Histogram CSV: header "bin_start_ps,count".
// Records are sorted by timestamp in every format.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace heraldsim {

enum class Channel : std::uint8_t { herald = 0, fluorescence = 1 };

inline std::string_view to_string(Channel c) {
  return c == Channel::herald ? "herald" : "fluorescence";
}

/// Accepts "herald"/"fluorescence" or the numeric ids 0/1.
inline std::optional<Channel> parse_channel(std::string_view s) {
  if (s == "herald" || s == "0") return Channel::herald;
  if (s == "fluorescence" || s == "1") return Channel::fluorescence;
  return std::nullopt;
}

struct TimeTag {
  Channel channel = Channel::herald;
  std::int64_t timestamp = 0;  ///< ps since stream start

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Total order used for merging: timestamp, then channel.
inline bool tag_order(const TimeTag& a, const TimeTag& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.channel < b.channel;
}

struct TagStream {
  std::vector<TimeTag> tags;
  std::int64_t duration = 0;  ///< ps covered by the acquisition
  std::string config_digest;  ///< identifies the generating config, if any

  std::size_t count(Channel c) const {
    return static_cast<std::size_t>(std::count_if(
        tags.begin(), tags.end(), [c](const TimeTag& t) { return t.channel == c; }));
  }

  std::vector<std::int64_t> timestamps(Channel c) const {
    std::vector<std::int64_t> out;
    for (const auto& t : tags) {
      if (t.channel == c) out.push_back(t.timestamp);
    }
    return out;
  }
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed tag data. record_index is the zero-based record at fault, empty
/// for header-level problems.
class TagParseError : public std::runtime_error {
 public:
  TagParseError(const std::string& what, std::optional<std::size_t> record_index)
      : std::runtime_error(record_index ? "record " + std::to_string(*record_index) + ": " + what
                                        : "header: " + what),
        record_index_(record_index) {}

  std::optional<std::size_t> record_index() const { return record_index_; }

 private:
  std::optional<std::size_t> record_index_;
};

inline constexpr std::array<char, 4> kTagMagic{'H', 'T', 'A', 'G'};
inline constexpr std::uint16_t kTagFormatVersion = 1;
inline constexpr std::size_t kTagHeaderBytes = 16;
inline constexpr std::size_t kTagRecordBytes = 9;

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline void check_record(const TimeTag& tag, const TimeTag* prev, std::size_t index) {
  if (tag.timestamp < 0) throw TagParseError("negative timestamp", index);
  if (prev != nullptr && tag.timestamp < prev->timestamp) {
    throw TagParseError("timestamps not sorted", index);
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Throws TagParseError if tags are unsorted or have negative timestamps.
inline void validate(const TagStream& s) {
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    detail::check_record(s.tags[i], i ? &s.tags[i - 1] : nullptr, i);
  }
}

inline std::string encode_tags_binary(const TagStream& s) {
  validate(s);
  std::string out;
  out.reserve(kTagHeaderBytes + kTagRecordBytes * s.tags.size());
  out.append(kTagMagic.data(), kTagMagic.size());
  detail::put_le(out, kTagFormatVersion, 2);
  detail::put_le(out, 0, 2);
  detail::put_le(out, s.tags.size(), 8);
  for (const auto& t : s.tags) {
    out.push_back(static_cast<char>(t.channel));
    detail::put_le(out, static_cast<std::uint64_t>(t.timestamp), 8);
  }
  return out;
}

/// Parses a binary tag file image. The stream duration is set to one past
/// the last timestamp since the format does not store it.
inline TagStream decode_tags_binary(std::string_view bytes) {
  if (bytes.size() < kTagHeaderBytes) throw TagParseError("truncated header", std::nullopt);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (!std::equal(kTagMagic.begin(), kTagMagic.end(), bytes.begin())) {
    throw TagParseError("bad magic", std::nullopt);
  }
  const auto version = detail::get_le(p + 4, 2);
  if (version != kTagFormatVersion) {
    throw TagParseError("unsupported version " + std::to_string(version), std::nullopt);
  }
  const std::uint64_t n = detail::get_le(p + 8, 8);
  const std::size_t payload = bytes.size() - kTagHeaderBytes;
  if (payload % kTagRecordBytes != 0 || payload / kTagRecordBytes != n) {
    const std::size_t complete = payload / kTagRecordBytes;
    throw TagParseError("record count " + std::to_string(n) + " does not match file size",
                        std::min<std::uint64_t>(complete, n));
  }
  TagStream s;
  s.tags.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* r = p + kTagHeaderBytes + i * kTagRecordBytes;
    if (r[0] > 1) throw TagParseError("unknown channel " + std::to_string(r[0]), i);
    TimeTag tag{static_cast<Channel>(r[0]), static_cast<std::int64_t>(detail::get_le(r + 1, 8))};
    detail::check_record(tag, i ? &s.tags.back() : nullptr, i);
    s.tags.push_back(tag);
  }
  s.duration = s.tags.empty() ? 0 : s.tags.back().timestamp + 1;
  return s;
}

inline std::string encode_tags_csv(const TagStream& s) {
  validate(s);
  std::string out = "channel,timestamp_ps\n";
  for (const auto& t : s.tags) {
    out += to_string(t.channel);
    out += ',';
    out += std::to_string(t.timestamp);
    out += '\n';
  }
  return out;
}

inline TagStream decode_tags_csv(std::string_view text) {
  TagStream s;
  std::size_t pos = 0;
  bool header = true;
  std::size_t index = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (header) {
      if (line != "channel,timestamp_ps") {
        throw TagParseError("expected 'channel,timestamp_ps'", std::nullopt);
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) throw TagParseError("missing field", index);
    const auto ch = parse_channel(detail::trim(line.substr(0, comma)));
    if (!ch) throw TagParseError("unknown channel", index);
    TimeTag tag{*ch, 0};
    if (!detail::parse_int(line.substr(comma + 1), tag.timestamp)) {
      throw TagParseError("bad timestamp", index);
    }
    detail::check_record(tag, s.tags.empty() ? nullptr : &s.tags.back(), index);
    s.tags.push_back(tag);
    ++index;
  }
  if (header) throw TagParseError("empty file", std::nullopt);
  s.duration = s.tags.empty() ? 0 : s.tags.back().timestamp + 1;
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

inline bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

/// Writes CSV for a ".csv" path, the binary format otherwise.
inline void write_tags(const TagStream& s, const std::string& path) {
  write_file(path, has_csv_extension(path) ? encode_tags_csv(s) : encode_tags_binary(s));
}

/// Reads either format; binary files are recognized by their magic.
inline TagStream read_tags(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() >= 4 && std::equal(kTagMagic.begin(), kTagMagic.end(), data.begin())) {
    return decode_tags_binary(data);
  }
  return decode_tags_csv(data);
}

// ---------------------------------------------------------------------------
// Histograms

/// Uniform-bin counts; bin i covers [t_min + i w, t_min + (i+1) w) ps.
struct Histogram {
  std::int64_t t_min = 0;
  std::int64_t bin_width = 1;
  std::vector<std::uint64_t> counts;

  std::size_t size() const { return counts.size(); }
  std::int64_t t_max() const {
    return t_min + bin_width * static_cast<std::int64_t>(counts.size());
  }
  std::int64_t bin_start(std::size_t i) const {
    return t_min + bin_width * static_cast<std::int64_t>(i);
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  /// Sum of counts in bins lying entirely inside [lo, hi).
  std::uint64_t area(std::int64_t lo, std::int64_t hi) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (bin_start(i) >= lo && bin_start(i) + bin_width <= hi) s += counts[i];
    }
    return s;
  }

  /// Merges groups of `factor` adjacent bins. size() must divide evenly.
  Histogram rebinned(std::size_t factor) const {
    if (factor == 0 || counts.size() % factor != 0) {
      throw std::invalid_argument("rebin factor must divide the bin count");
    }
    Histogram h{t_min, bin_width * static_cast<std::int64_t>(factor), {}};
    h.counts.assign(counts.size() / factor, 0);
    for (std::size_t i = 0; i < counts.size(); ++i) h.counts[i / factor] += counts[i];
    return h;
  }

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

namespace detail {

inline std::size_t bin_count(std::int64_t t_min, std::int64_t t_max, std::int64_t bin_width) {
  if (bin_width <= 0) throw std::invalid_argument("bin width must be positive");
  if (t_max <= t_min) throw std::invalid_argument("window must satisfy t_min < t_max");
  if ((t_max - t_min) % bin_width != 0) {
    throw std::invalid_argument("bin width must divide the window length");
  }
  return static_cast<std::size_t>((t_max - t_min) / bin_width);
}

/// Calls f(delay) for every (start, stop) pair with delay in [lo, hi).
/// Both inputs sorted. Identical indices are skipped when `same` is set.
template <class F>
void for_each_delay(const std::vector<std::int64_t>& starts,
                    const std::vector<std::int64_t>& stops, std::int64_t lo, std::int64_t hi,
                    bool same, F&& f) {
  std::size_t first = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const std::int64_t s = starts[i];
    while (first < stops.size() && stops[first] - s < lo) ++first;
    for (std::size_t j = first; j < stops.size() && stops[j] - s < hi; ++j) {
      if (same && i == j) continue;
      f(stops[j] - s);
    }
  }
}

}  // namespace detail

/// Full start-stop cross-correlation: every stop tag with
/// t_min <= stop - start < t_max is counted for every start tag.
inline Histogram delay_histogram(const TagStream& stream, Channel start, Channel stop,
                                 std::int64_t t_min, std::int64_t t_max,
                                 std::int64_t bin_width) {
  Histogram h{t_min, bin_width, {}};
  h.counts.assign(detail::bin_count(t_min, t_max, bin_width), 0);
  const auto starts = stream.timestamps(start);
  const auto stops = start == stop ? starts : stream.timestamps(stop);
  detail::for_each_delay(starts, stops, t_min, t_max, start == stop, [&](std::int64_t d) {
    ++h.counts[static_cast<std::size_t>((d - t_min) / bin_width)];
  });
  return h;
}

/// Number of (start, stop) pairs with lo <= delay <= hi.
inline std::uint64_t count_coincidences(const TagStream& stream, Channel start, Channel stop,
                                        std::int64_t lo, std::int64_t hi) {
  std::uint64_t n = 0;
  const auto starts = stream.timestamps(start);
  const auto stops = start == stop ? starts : stream.timestamps(stop);
  detail::for_each_delay(starts, stops, lo, hi + 1, start == stop, [&](std::int64_t) { ++n; });
  return n;
}

/// Histogram of tag arrival phase, timestamp mod period, over [0, period).
inline Histogram folded_histogram(const TagStream& stream, Channel channel,
                                  std::int64_t period, std::int64_t bin_width) {
  Histogram h{0, bin_width, {}};
  h.counts.assign(detail::bin_count(0, period, bin_width), 0);
  for (const auto& t : stream.tags) {
    if (t.channel != channel) continue;
    ++h.counts[static_cast<std::size_t>((t.timestamp % period) / bin_width)];
  }
  return h;
}

inline std::string encode_histogram_csv(const Histogram& h) {
  std::string out = "bin_start_ps,count\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    out += std::to_string(h.bin_start(i));
    out += ',';
    out += std::to_string(h.counts[i]);
    out += '\n';
  }
  return out;
}

/// Bin width is inferred from the first two rows, so at least two bins are
/// required; starts must be evenly spaced.
inline Histogram decode_histogram_csv(std::string_view text) {
  std::vector<std::int64_t> starts;
  Histogram h;
  std::size_t pos = 0;
  bool header = true;
  std::size_t row = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (header) {
      if (line != "bin_start_ps,count") {
        throw std::invalid_argument("histogram CSV: expected header 'bin_start_ps,count'");
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    std::int64_t start = 0;
    std::uint64_t count = 0;
    if (comma == std::string_view::npos || !detail::parse_int(line.substr(0, comma), start) ||
        !detail::parse_int(line.substr(comma + 1), count)) {
      throw std::invalid_argument("histogram CSV: malformed row " + std::to_string(row));
    }
    starts.push_back(start);
    h.counts.push_back(count);
    ++row;
  }
  if (starts.size() < 2) throw std::invalid_argument("histogram CSV: need at least two bins");
  h.t_min = starts[0];
  h.bin_width = starts[1] - starts[0];
  if (h.bin_width <= 0) throw std::invalid_argument("histogram CSV: bin starts must increase");
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i] != h.bin_start(i)) {
      throw std::invalid_argument("histogram CSV: uneven bin spacing at row " + std::to_string(i));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// g2(0)

struct G2Estimate {
  double g2 = 0.0;
  double std_error = 0.0;
  std::uint64_t heralds = 0;
  std::uint64_t heralds_with_one_or_more = 0;  ///< N1: >= 1 fluorescence in slot
  std::uint64_t heralds_with_two_or_more = 0;  ///< N2: >= 2 fluorescence in slot
};

/// Heralded g2(0) from per-herald slot statistics on one fluorescence
/// detector.
///
/// Each herald opens a slot [h + offset, h + offset + window). With P1 and P2
/// the fractions of heralds whose slot holds >= 1 and >= 2 fluorescence tags,
///   g2 = 2 P2 / P1^2,
/// which tends to 1 for Poissonian light and 0 for a single-photon state.
/// Error: var(log g2) = 1/N2 + 4 (1 - P1)/N1. With N2 = 0 the estimate is 0
/// and the reported error is the one-event resolution 2 Nh / N1^2.
inline G2Estimate estimate_g2(const TagStream& stream, std::int64_t window,
                              std::int64_t offset = 0) {
  if (window <= 0) throw std::invalid_argument("coincidence window must be positive");
  const auto heralds = stream.timestamps(Channel::herald);
  const auto fluor = stream.timestamps(Channel::fluorescence);
  if (heralds.empty()) throw std::domain_error("g2 undefined: no herald tags");
  G2Estimate e;
  e.heralds = heralds.size();
  std::size_t first = 0;
  for (const std::int64_t h : heralds) {
    const std::int64_t lo = h + offset;
    while (first < fluor.size() && fluor[first] < lo) ++first;
    std::size_t j = first;
    while (j < fluor.size() && fluor[j] < lo + window && j - first < 2) ++j;
    const std::size_t in_slot = j - first;
    if (in_slot >= 1) ++e.heralds_with_one_or_more;
    if (in_slot >= 2) ++e.heralds_with_two_or_more;
  }
  if (e.heralds_with_one_or_more == 0) {
    throw std::domain_error("g2 undefined: no heralded fluorescence detections");
  }
  const double nh = static_cast<double>(e.heralds);
  const double n1 = static_cast<double>(e.heralds_with_one_or_more);
  const double n2 = static_cast<double>(e.heralds_with_two_or_more);
  e.g2 = 2.0 * n2 * nh / (n1 * n1);
  if (e.heralds_with_two_or_more > 0) {
    e.std_error = e.g2 * std::sqrt(1.0 / n2 + 4.0 * (1.0 - n1 / nh) / n1);
  } else {
    e.std_error = 2.0 * nh / (n1 * n1);
  }
  return e;
}

}  // namespace heraldsim
