#include "gridshield/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace gridshield {

namespace {

constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void leb128(std::uint64_t v) {
    do {
      std::uint8_t b = v & 0x7F;
      v >>= 7;
      if (v) b |= 0x80;
      out_.push_back(b);
    } while (v);
  }
  std::size_t size() const noexcept { return out_.size(); }
  Bytes& buffer() noexcept { return out_; }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t leb128() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t b = u8();
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if (!(b & 0x80)) return v;
    }
    throw Error(ErrorCode::FormatError, "malformed variable-length integer");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }
  std::span<const std::uint8_t> span(std::size_t from, std::size_t to) const { return in_.subspan(from, to - from); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::FormatError, "file is truncated");
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_header(Writer& w, const char* magic, const PartitionSpec& spec, const std::vector<Action>& actions) {
  w.bytes(magic, 4);
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(spec.dim()));
  for (double v : spec.lower()) w.f64(v);
  for (double v : spec.upper()) w.f64(v);
  for (double v : spec.gamma()) w.f64(v);
  w.u8(static_cast<std::uint8_t>(actions.size()));
  for (const auto& a : actions) {
    if (a.name.size() > 255) throw Error(ErrorCode::FormatError, "action name longer than 255 bytes");
    w.u8(static_cast<std::uint8_t>(a.name.size()));
    w.bytes(a.name.data(), a.name.size());
  }
}

FileHeader read_header(Reader& r, const char* expected_magic) {
  auto magic = r.take(4);
  if (expected_magic && std::memcmp(magic.data(), expected_magic, 4) != 0)
    throw Error(ErrorCode::FormatError, std::string("bad magic, expected ") + std::string(expected_magic, 4));
  const std::uint16_t version = r.u16();
  if (version != kVersion) throw Error(ErrorCode::FormatError, "unsupported format version " + std::to_string(version));
  const std::size_t k = r.u8();
  if (k == 0 || k > kMaxDim) throw Error(ErrorCode::FormatError, "bad dimension in header");
  std::vector<double> lower(k), upper(k), gamma(k);
  for (auto& v : lower) v = r.f64();
  for (auto& v : upper) v = r.f64();
  for (auto& v : gamma) v = r.f64();
  const std::size_t count = r.u8();
  if (count == 0 || count > kMaxActions) throw Error(ErrorCode::FormatError, "bad action count in header");
  std::vector<Action> actions(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto len = r.u8();
    auto name = r.take(len);
    actions[i] = {static_cast<ActionId>(i), std::string(name.begin(), name.end())};
  }
  PartitionSpec spec = [&] {
    try {
      return PartitionSpec(lower, upper, gamma);
    } catch (const Error& e) {
      throw Error(ErrorCode::FormatError, std::string("bad partition in header: ") + e.what());
    }
  }();
  FileHeader h{{}, version, std::move(spec), std::move(actions)};
  std::memcpy(h.magic, magic.data(), 4);
  return h;
}

void write_checksum(Writer& w, std::size_t body_start) {
  const auto& buf = w.buffer();
  w.u64(fnv1a64(std::span<const std::uint8_t>(buf.data() + body_start, buf.size() - body_start)));
}

void verify_checksum(Reader& r, std::size_t body_start) {
  const auto body = r.span(body_start, r.pos());
  const std::uint64_t stored = r.u64();
  if (stored != fnv1a64(body)) throw Error(ErrorCode::FormatError, "checksum mismatch");
  if (r.remaining() != 0) throw Error(ErrorCode::FormatError, "trailing bytes after checksum");
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes encode_shield(const MostPermissiveStrategy& strategy) {
  Writer w;
  write_header(w, "SHLD", strategy.spec(), strategy.actions());
  w.u8(static_cast<std::uint8_t>(strategy.oob_policy()));
  const std::size_t body = w.size();
  w.bytes(strategy.masks().data(), strategy.masks().size());
  write_checksum(w, body);
  return std::move(w.buffer());
}

MostPermissiveStrategy decode_shield(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto h = read_header(r, "SHLD");
  const auto oob = r.u8();
  if (oob > 1) throw Error(ErrorCode::FormatError, "bad out-of-bounds policy byte");
  const std::size_t body = r.pos();
  auto payload = r.take(h.spec.cell_count());
  verify_checksum(r, body);
  return MostPermissiveStrategy(std::move(h.spec), std::move(h.actions),
                                std::vector<std::uint8_t>(payload.begin(), payload.end()),
                                static_cast<OobPolicy>(oob));
}

Bytes encode_transitions(const TransitionSystem& ts, const SupportScheme& scheme, std::uint64_t digest) {
  Writer w;
  write_header(w, "HSTS", ts.spec(), ts.actions());
  w.u32(scheme.n);
  w.u8(static_cast<std::uint8_t>(scheme.randomness));
  w.u32(scheme.m);
  w.u64(digest);
  const std::size_t body = w.size();
  const CellIndex cells = ts.cell_count();
  for (CellIndex c = 0; c < cells; ++c) {
    for (ActionId a = 0; a < ts.action_count(); ++a) {
      auto list = ts.successors(c, a);
      w.leb128(list.size());
      CellIndex prev = 0;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const CellIndex v = list[i] == TransitionSystem::kOutOfBounds ? cells : list[i];
        w.leb128(i == 0 ? v : v - prev);
        prev = v;
      }
    }
  }
  write_checksum(w, body);
  return std::move(w.buffer());
}

TransitionCache decode_transitions(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto h = read_header(r, "HSTS");
  SupportScheme scheme;
  scheme.n = r.u32();
  const auto policy = r.u8();
  if (policy > 1) throw Error(ErrorCode::FormatError, "bad randomness policy byte");
  scheme.randomness = static_cast<RandomnessPolicy>(policy);
  scheme.m = r.u32();
  const std::uint64_t digest = r.u64();
  const std::size_t body = r.pos();
  const CellIndex cells = h.spec.cell_count();
  const std::size_t keys = cells * h.actions.size();
  std::vector<std::uint64_t> offsets;
  offsets.reserve(keys + 1);
  offsets.push_back(0);
  std::vector<CellIndex> successors;
  for (std::size_t key = 0; key < keys; ++key) {
    const std::uint64_t count = r.leb128();
    if (count > r.remaining()) throw Error(ErrorCode::FormatError, "successor count exceeds file size");
    CellIndex prev = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t delta = r.leb128();
      if (i > 0 && delta == 0) throw Error(ErrorCode::FormatError, "successor list is not strictly increasing");
      const CellIndex v = i == 0 ? delta : prev + delta;
      if (v > cells || v < prev) throw Error(ErrorCode::FormatError, "successor ordinal out of range");
      successors.push_back(v == cells ? TransitionSystem::kOutOfBounds : v);
      prev = v;
    }
    offsets.push_back(successors.size());
  }
  verify_checksum(r, body);
  return {TransitionSystem(std::move(h.spec), std::move(h.actions), std::move(offsets), std::move(successors)),
          scheme, digest};
}

Bytes encode_qtable(const QTable& q) {
  Writer w;
  write_header(w, "HSQT", q.spec(), q.actions());
  const std::size_t body = w.size();
  for (double v : q.values()) w.f64(v);
  for (auto v : q.visit_counts()) w.u32(v);
  write_checksum(w, body);
  return std::move(w.buffer());
}

QTable decode_qtable(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto h = read_header(r, "HSQT");
  const std::size_t body = r.pos();
  const std::size_t n = h.spec.cell_count() * h.actions.size();
  if (r.remaining() < n * 12 + 8) throw Error(ErrorCode::FormatError, "file is truncated");
  std::vector<double> values(n);
  for (auto& v : values) {
    v = r.f64();
    if (!std::isfinite(v)) throw Error(ErrorCode::FormatError, "non-finite Q value");
  }
  std::vector<std::uint32_t> visits(n);
  for (auto& v : visits) v = r.u32();
  verify_checksum(r, body);
  return QTable(std::move(h.spec), std::move(h.actions), std::move(values), std::move(visits));
}

FileHeader peek_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  return read_header(r, nullptr);
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace gridshield
