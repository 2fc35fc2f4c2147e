#include "vifi/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace vifi {

namespace fs = std::filesystem;

namespace {

std::string path_text(const fs::path& p) { return p.string(); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path_text(path) + " for writing");
  return out;
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path_text(path) + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path_text(path));
}

void put_u32_le(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const char* p, bool little) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const auto byte = static_cast<std::uint32_t>(static_cast<unsigned char>(p[little ? i : 3 - i]));
    v |= byte << (8 * i);
  }
  return v;
}

void put_f32_le(std::string& buf, double v) {
  put_u32_le(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

double get_f32(const char* p, bool little) {
  return static_cast<double>(std::bit_cast<float>(get_u32(p, little)));
}

// Whitespace-separated header tokens of the netpbm family; '#' starts a
// comment. Leaves `pos` on the single whitespace byte after the last token.
struct HeaderReader {
  const std::vector<char>& bytes;
  std::size_t pos = 0;
  const fs::path& path;

  std::string next() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      tok.push_back(bytes[pos++]);
    }
    if (tok.empty()) throw IoError("truncated header in " + path_text(path));
    return tok;
  }

  int next_int() {
    const std::string t = next();
    try {
      std::size_t used = 0;
      const int v = std::stoi(t, &used);
      if (used != t.size() || v <= 0) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw IoError("bad header value '" + t + "' in " + path_text(path));
    }
  }

  std::size_t payload_start() {
    if (pos >= bytes.size()) throw IoError("missing payload in " + path_text(path));
    return pos + 1;
  }
};

void require_payload(const std::vector<char>& bytes, std::size_t start, std::size_t need,
                     const fs::path& path) {
  if (bytes.size() < start || bytes.size() - start < need) {
    throw IoError("truncated payload in " + path_text(path));
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ImageGrid quantize_float(const ImageGrid& grid) {
  ImageGrid out = grid;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out.data()[i] = static_cast<double>(static_cast<float>(out.data()[i]));
  }
  return out;
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ImageGrid quantize_byte(const ImageGrid& grid) {
  ImageGrid out = grid;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = to_byte(out.data()[i]) / 255.0;
  return out;
}

void write_pfm(const fs::path& path, const ImageGrid& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw std::invalid_argument("write_pfm: grid needs 1 or 3 channels");
  }
  std::string buf = grid.channels() == 1 ? "Pf\n" : "PF\n";
  buf += std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n-1.0\n";
  for (int y = grid.height() - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width(); ++x) {
      for (int c = 0; c < grid.channels(); ++c) put_f32_le(buf, grid(y, x, c));
    }
  }
  std::ofstream out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish(out, path);
}

ImageGrid read_pfm(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  HeaderReader hr{bytes, 0, path};
  const std::string magic = hr.next();
  if (magic != "Pf" && magic != "PF") throw IoError("not a PFM file: " + path_text(path));
  const int channels = magic == "Pf" ? 1 : 3;
  const int width = hr.next_int();
  const int height = hr.next_int();
  const std::string scale_tok = hr.next();
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw IoError("bad PFM scale in " + path_text(path));
  }
  if (scale == 0.0) throw IoError("bad PFM scale in " + path_text(path));
  const bool little = scale < 0.0;
  const std::size_t start = hr.payload_start();
  require_payload(bytes, start, std::size_t(4) * width * height * channels, path);
  ImageGrid grid(height, width, channels);
  const char* p = bytes.data() + start;
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c, p += 4) grid(y, x, c) = get_f32(p, little);
    }
  }
  return grid;
}

void write_ppm(const fs::path& path, const ImageGrid& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw std::invalid_argument("write_ppm: grid needs 1 or 3 channels");
  }
  std::string buf = "P6\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) +
                    "\n255\n";
  for (Eigen::Index p = 0; p < grid.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const int src = grid.channels() == 1 ? 0 : c;
      buf.push_back(static_cast<char>(to_byte(grid.data()[p * grid.channels() + src])));
    }
  }
  std::ofstream out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish(out, path);
}

ImageGrid read_ppm(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  HeaderReader hr{bytes, 0, path};
  if (hr.next() != "P6") throw IoError("not a binary PPM file: " + path_text(path));
  const int width = hr.next_int();
  const int height = hr.next_int();
  if (hr.next_int() != 255) throw IoError("unsupported PPM maxval in " + path_text(path));
  const std::size_t start = hr.payload_start();
  require_payload(bytes, start, std::size_t(3) * width * height, path);
  ImageGrid grid(height, width, 3);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    grid.data()[i] = static_cast<unsigned char>(bytes[start + i]) / 255.0;
  }
  return grid;
}

void write_flo(const fs::path& path, const FlowField& flow) {
  if (flow.channels() != 2) throw std::invalid_argument("write_flo: flow needs 2 channels");
  std::string buf = "PIEH";
  put_u32_le(buf, static_cast<std::uint32_t>(flow.width()));
  put_u32_le(buf, static_cast<std::uint32_t>(flow.height()));
  for (Eigen::Index i = 0; i < flow.size(); ++i) put_f32_le(buf, flow.data()[i]);
  std::ofstream out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  finish(out, path);
}

FlowField read_flo(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  if (bytes.size() < 12 || std::string(bytes.data(), 4) != "PIEH") {
    throw IoError("not a .flo file: " + path_text(path));
  }
  const auto width = static_cast<std::int32_t>(get_u32(bytes.data() + 4, true));
  const auto height = static_cast<std::int32_t>(get_u32(bytes.data() + 8, true));
  if (width <= 0 || height <= 0) throw IoError("bad .flo size in " + path_text(path));
  require_payload(bytes, 12, std::size_t(8) * width * height, path);
  FlowField flow(height, width, 2);
  for (Eigen::Index i = 0; i < flow.size(); ++i) {
    flow.data()[i] = get_f32(bytes.data() + 12 + 4 * i, true);
  }
  return flow;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  finish(out, path);
}

std::string read_text(const fs::path& path) {
  const std::vector<char> bytes = read_all(path);
  return {bytes.begin(), bytes.end()};
}

namespace {

std::string index_name(const char* stem, int i, const char* ext) {
  return std::string(stem) + "_" + std::to_string(i) + ext;
}

}  // namespace

void write_bundle(const fs::path& dir, const Bundle& bundle) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + path_text(dir) + ": " + ec.message());
  std::ostringstream m;
  m << "vifi-bundle 1\n";
  m << "size " << bundle.width << " " << bundle.height << "\n";
  m << "intrinsics " << format_double(bundle.k.fx) << " " << format_double(bundle.k.fy) << " "
    << format_double(bundle.k.cx) << " " << format_double(bundle.k.cy) << "\n";
  m << "frames " << bundle.images.size() << "\n";
  for (int i = 0; i < static_cast<int>(bundle.images.size()); ++i) {
    const std::string image = index_name("frame", i, ".ppm");
    const std::string depth = index_name("depth", i, ".pfm");
    write_ppm(dir / image, bundle.images[i]);
    write_pfm(dir / depth, bundle.depths[i]);
    m << "frame " << i << " image " << image << " depth " << depth << " rotation";
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m << " " << format_double(bundle.poses[i].rotation(r, c));
    }
    m << " translation";
    for (int r = 0; r < 3; ++r) m << " " << format_double(bundle.poses[i].translation[r]);
    m << "\n";
  }
  for (const InterpolationTruth& t : bundle.interpolations) {
    const std::string to_prev = "flow_" + std::to_string(t.mid) + "_" + std::to_string(t.prev) + ".flo";
    const std::string to_next = "flow_" + std::to_string(t.mid) + "_" + std::to_string(t.next) + ".flo";
    const std::string merge = index_name("merge", t.mid, ".pfm");
    const std::string covisible = index_name("covisible", t.mid, ".pfm");
    write_flo(dir / to_prev, t.to_prev);
    write_flo(dir / to_next, t.to_next);
    write_pfm(dir / merge, t.merge);
    write_pfm(dir / covisible, t.covisible.cast<double>());
    m << "interpolation " << t.mid << " prev " << t.prev << " next " << t.next << " to_prev "
      << to_prev << " to_next " << to_next << " merge " << merge << " covisible " << covisible
      << "\n";
  }
  write_text(dir / "manifest.txt", m.str());
}

namespace {

void expect(std::istream& in, const std::string& word, const fs::path& path) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw IoError("manifest " + path_text(path) + ": expected '" + word + "'");
  }
}

template <typename T>
T value(std::istream& in, const fs::path& path) {
  T v{};
  if (!(in >> v)) throw IoError("manifest " + path_text(path) + ": malformed value");
  return v;
}

}  // namespace

Bundle read_bundle(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.txt";
  std::istringstream in(read_text(mpath));
  expect(in, "vifi-bundle", mpath);
  if (value<int>(in, mpath) != 1) throw IoError("unsupported manifest version in " + path_text(mpath));
  Bundle b;
  expect(in, "size", mpath);
  b.width = value<int>(in, mpath);
  b.height = value<int>(in, mpath);
  expect(in, "intrinsics", mpath);
  b.k.fx = value<double>(in, mpath);
  b.k.fy = value<double>(in, mpath);
  b.k.cx = value<double>(in, mpath);
  b.k.cy = value<double>(in, mpath);
  expect(in, "frames", mpath);
  if (value<int>(in, mpath) != static_cast<int>(b.images.size())) {
    throw IoError("manifest " + path_text(mpath) + ": expected 5 frames");
  }
  auto check_shape = [&](const ImageGrid& g, const fs::path& p) {
    if (g.height() != b.height || g.width() != b.width) {
      throw IoError("size mismatch between manifest and " + path_text(p));
    }
  };
  for (int i = 0; i < static_cast<int>(b.images.size()); ++i) {
    expect(in, "frame", mpath);
    if (value<int>(in, mpath) != i) throw IoError("manifest " + path_text(mpath) + ": frames out of order");
    expect(in, "image", mpath);
    const fs::path image = dir / value<std::string>(in, mpath);
    expect(in, "depth", mpath);
    const fs::path depth = dir / value<std::string>(in, mpath);
    expect(in, "rotation", mpath);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) b.poses[i].rotation(r, c) = value<double>(in, mpath);
    }
    expect(in, "translation", mpath);
    for (int r = 0; r < 3; ++r) b.poses[i].translation[r] = value<double>(in, mpath);
    b.images[i] = read_ppm(image).channel(0);
    b.depths[i] = read_pfm(depth);
    check_shape(b.images[i], image);
    check_shape(b.depths[i], depth);
  }
  for (InterpolationTruth& t : b.interpolations) {
    expect(in, "interpolation", mpath);
    t.mid = value<int>(in, mpath);
    expect(in, "prev", mpath);
    t.prev = value<int>(in, mpath);
    expect(in, "next", mpath);
    t.next = value<int>(in, mpath);
    expect(in, "to_prev", mpath);
    t.to_prev = read_flo(dir / value<std::string>(in, mpath));
    expect(in, "to_next", mpath);
    t.to_next = read_flo(dir / value<std::string>(in, mpath));
    expect(in, "merge", mpath);
    t.merge = read_pfm(dir / value<std::string>(in, mpath));
    expect(in, "covisible", mpath);
    const ImageGrid covisible = read_pfm(dir / value<std::string>(in, mpath));
    t.covisible = ValidityMask(covisible.height(), covisible.width());
    for (Eigen::Index p = 0; p < covisible.size(); ++p) {
      t.covisible.data()[p] = covisible.data()[p] != 0.0 ? 1 : 0;
    }
  }
  return b;
}

}  // namespace vifi
