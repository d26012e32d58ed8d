#include "maflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace maflow {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'F', 'L', 'O', 'W', '0', '1'};

template <class U>
void put(std::vector<unsigned char>& buf, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) buf.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

void put_f64(std::vector<unsigned char>& buf, double v) { put(buf, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::vector<unsigned char>& buf;
  std::size_t pos = 0;

  void need(std::size_t bytes, std::size_t total_expected) const {
    if (pos + bytes > buf.size()) {
      std::ostringstream msg;
      msg << "checkpoint truncated: expected " << total_expected << " bytes, got "
          << buf.size();
      throw CheckpointError(msg.str());
    }
  }
  template <class U>
  U get() {
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(buf[pos + b]) << (8 * b);
    pos += sizeof(U);
    return v;
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
};

}  // namespace

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const TorusDomain& d = c.u.domain;
  std::vector<unsigned char> buf(kMagic, kMagic + 8);
  put<std::uint16_t>(buf, kCheckpointVersion);
  put<std::uint8_t>(buf, static_cast<std::uint8_t>(d.n));
  for (int k = 0; k < d.real_dims(); ++k) put<std::uint32_t>(buf, static_cast<std::uint32_t>(d.counts[k]));
  for (int k = 0; k < d.real_dims(); ++k) put_f64(buf, d.periods[k]);
  put_f64(buf, c.t);
  for (double v : c.u.values) put_f64(buf, v);

  // Write then rename so a crash never leaves half a checkpoint behind.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  Reader r{buf};
  constexpr std::size_t header = 8 + 2 + 1;
  r.need(header, header);
  if (std::memcmp(buf.data(), kMagic, 8) != 0) throw CheckpointError("bad checkpoint magic in " + path.string());
  r.pos = 8;
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const int n = r.get<std::uint8_t>();
  if (n != 1 && n != 2) throw CheckpointError("checkpoint has invalid dimension n=" + std::to_string(n));
  const int dims = 2 * n;
  std::size_t expected = header + dims * (4 + 8) + 8;
  r.need(dims * 4, expected);
  std::vector<int> counts(dims);
  std::size_t points = 1;
  for (auto& c : counts) {
    c = static_cast<int>(r.get<std::uint32_t>());
    points *= static_cast<std::size_t>(c);
  }
  expected += points * 8;
  r.need(dims * 8 + 8, expected);
  std::vector<double> periods(dims);
  for (auto& p : periods) p = r.get_f64();
  Checkpoint c;
  c.t = r.get_f64();
  r.need(points * 8, expected);
  if (buf.size() != expected) {
    std::ostringstream msg;
    msg << "checkpoint has trailing data: expected " << expected << " bytes, got " << buf.size();
    throw CheckpointError(msg.str());
  }
  TorusDomain d;
  try {
    d = TorusDomain::make(n, counts, periods);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint grid is invalid: ") + e.what());
  }
  std::vector<double> values(points);
  for (auto& v : values) v = r.get_f64();
  c.u = ScalarField(std::move(d), std::move(values));
  return c;
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const TorusDomain& expected) {
  Checkpoint c = read_checkpoint(path);
  if (!(c.u.domain == expected)) {
    std::ostringstream msg;
    msg << "checkpoint dimension mismatch: file has n=" << c.u.domain.n << " grid";
    for (int k : c.u.domain.counts) msg << ' ' << k;
    msg << ", config has n=" << expected.n << " grid";
    for (int k : expected.counts) msg << ' ' << k;
    throw CheckpointError(msg.str());
  }
  return c;
}

}  // namespace maflow
