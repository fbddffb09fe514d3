#include "grasp/array_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

namespace grasp {

namespace fs = std::filesystem;

namespace {

constexpr char kNpyMagic[] = "\x93NUMPY";
constexpr std::size_t kNpyMagicLen = 6;

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spill(const fs::path& path, const char* bytes, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes, static_cast<std::streamsize>(n));
  if (!out) throw DataError("write failed: " + path.string());
}

template <typename T>
void put_le(std::vector<char>& out, T value) {
  using U = std::conditional_t<
      sizeof(T) == 8, std::uint64_t,
      std::conditional_t<sizeof(T) == 4, std::uint32_t, std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
  using U = std::conditional_t<
      sizeof(T) == 8, std::uint64_t,
      std::conditional_t<sizeof(T) == 4, std::uint32_t, std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

std::size_t element_size(DType d) {
  switch (d) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
  }
  return 0;
}

const char* descr_of(DType d) {
  switch (d) {
    case DType::F32: return "<f4";
    case DType::F64: return "<f8";
    case DType::U8: return "|u1";
  }
  return "";
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// Value text following `'key':` in a numpy header dict.
std::string dict_value(const std::string& header, const std::string& key) {
  auto pos = header.find("'" + key + "'");
  if (pos == std::string::npos) throw DataError("npy header missing '" + key + "'");
  pos = header.find(':', pos);
  if (pos == std::string::npos) throw DataError("malformed npy header");
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  if (pos >= header.size()) throw DataError("malformed npy header");
  std::size_t end;
  if (header[pos] == '\'') {
    end = header.find('\'', pos + 1);
    if (end == std::string::npos) throw DataError("malformed npy header");
    return header.substr(pos + 1, end - pos - 1);
  }
  if (header[pos] == '(') {
    end = header.find(')', pos);
    if (end == std::string::npos) throw DataError("malformed npy header");
    return header.substr(pos, end - pos + 1);
  }
  end = header.find_first_of(",}", pos);
  if (end == std::string::npos) throw DataError("malformed npy header");
  return header.substr(pos, end - pos);
}

NpyHeader parse_npy_header(const char* bytes, std::size_t n) {
  if (n < kNpyMagicLen + 4 || std::memcmp(bytes, kNpyMagic, kNpyMagicLen) != 0)
    throw DataError("not an npy file (bad magic)");
  if (bytes[6] != 1 || bytes[7] != 0) throw DataError("unsupported npy version");
  const std::size_t header_len = get_le<std::uint16_t>(bytes + 8);
  if (n < 10 + header_len) throw DataError("truncated npy header");
  const std::string header(bytes + 10, header_len);

  NpyHeader h;
  const std::string descr = dict_value(header, "descr");
  if (descr == "<f4") h.dtype = DType::F32;
  else if (descr == "<f8") h.dtype = DType::F64;
  else if (descr == "|u1" || descr == "<u1") h.dtype = DType::U8;
  else throw DataError("unsupported npy dtype '" + descr + "'");

  std::string fortran = dict_value(header, "fortran_order");
  fortran.erase(std::remove(fortran.begin(), fortran.end(), ' '), fortran.end());
  if (fortran != "False") throw DataError("fortran-ordered npy arrays are not supported");

  const std::string shape = dict_value(header, "shape");
  std::string inner = shape.substr(1, shape.size() - 2);
  std::replace(inner.begin(), inner.end(), ',', ' ');
  std::istringstream ss(inner);
  long long dim;
  while (ss >> dim) {
    if (dim <= 0) throw DataError("npy shape dimensions must be positive");
    h.shape.push_back(static_cast<std::size_t>(dim));
  }
  if (!ss.eof()) throw DataError("malformed npy shape '" + shape + "'");
  if (h.shape.empty()) throw DataError("scalar npy arrays are not supported");
  h.data_offset = 10 + header_len;
  return h;
}

}  // namespace

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::F32: return "f32";
    case DType::F64: return "f64";
    case DType::U8: return "u8";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw UsageError("unknown split '" + s + "' (expected train, val or test)");
}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != size()) throw UsageError("array shape does not match element count");
}
DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != size()) throw UsageError("array shape does not match element count");
}
DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<std::uint8_t> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != size()) throw UsageError("array shape does not match element count");
}

DType DenseArray::dtype() const {
  switch (data_.index()) {
    case 0: return DType::F32;
    case 1: return DType::F64;
    default: return DType::U8;
  }
}

std::size_t DenseArray::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

double DenseArray::at(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, data_);
}

std::vector<char> encode_array(const DenseArray& a, bool allow_nonfinite) {
  if (a.shape().empty()) throw UsageError("cannot encode an array without shape");
  if (!allow_nonfinite && a.dtype() != DType::U8) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!std::isfinite(a.at(i)))
        throw DataError("non-finite element at index " + std::to_string(i));
  }

  std::string header = "{'descr': '";
  header += descr_of(a.dtype());
  header += "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < a.shape().size(); ++i) {
    if (i) header += ", ";
    header += std::to_string(a.shape()[i]);
  }
  if (a.shape().size() == 1) header += ",";
  header += "), }";
  // Pad so that magic + version + length + header is a multiple of 64.
  const std::size_t unpadded = kNpyMagicLen + 2 + 2 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';

  std::vector<char> out(kNpyMagic, kNpyMagic + kNpyMagicLen);
  out.push_back(1);
  out.push_back(0);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + a.size() * element_size(a.dtype()));
  std::visit(
      [&](const auto& v) {
        for (auto x : v) put_le(out, x);
      },
      a.storage());
  return out;
}

DenseArray decode_array(const std::vector<char>& bytes) {
  const NpyHeader h = parse_npy_header(bytes.data(), bytes.size());
  const std::size_t n = product(h.shape);
  const std::size_t need = h.data_offset + n * element_size(h.dtype);
  if (bytes.size() < need)
    throw DataError("truncated npy payload: expected " + std::to_string(n) + " elements");
  if (bytes.size() > need) throw DataError("npy payload has trailing bytes");
  const char* p = bytes.data() + h.data_offset;
  switch (h.dtype) {
    case DType::F32: {
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = get_le<float>(p + 4 * i);
      return DenseArray(h.shape, std::move(v));
    }
    case DType::F64: {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = get_le<double>(p + 8 * i);
      return DenseArray(h.shape, std::move(v));
    }
    case DType::U8: {
      std::vector<std::uint8_t> v(p, p + n);
      return DenseArray(h.shape, std::move(v));
    }
  }
  throw DataError("unsupported dtype");
}

DenseArray read_array(const fs::path& path) {
  try {
    return decode_array(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

NpyHeader read_array_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<char> head(10);
  in.read(head.data(), 10);
  if (in.gcount() != 10) throw DataError(path.string() + ": truncated npy header");
  const std::size_t len = get_le<std::uint16_t>(head.data() + 8);
  head.resize(10 + len);
  in.read(head.data() + 10, static_cast<std::streamsize>(len));
  try {
    NpyHeader h = parse_npy_header(head.data(), static_cast<std::size_t>(10 + in.gcount()));
    const auto payload = product(h.shape) * element_size(h.dtype);
    const auto total = fs::file_size(path);
    if (total != h.data_offset + payload) throw DataError("payload size does not match header");
    return h;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_array(const fs::path& path, const DenseArray& a, bool allow_nonfinite) {
  const auto bytes = encode_array(a, allow_nonfinite);
  spill(path, bytes.data(), bytes.size());
}

// --- PNM ---------------------------------------------------------------

ImageBuffer::ImageBuffer(int h, int w, int c, std::uint8_t fill)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
  if (h < 0 || w < 0 || (c != 1 && c != 3)) throw UsageError("invalid image dimensions");
}

namespace {

struct PnmHeader {
  int channels;
  int width;
  int height;
  std::size_t data_offset;
};

PnmHeader parse_pnm_header(const std::vector<char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw DataError("bad magic: expected binary PGM (P5) or PPM (P6)");
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1 << 24) throw DataError("PNM header value out of range");
      ++pos;
    }
    if (pos == start) throw DataError("malformed PNM header");
    return value;
  };
  PnmHeader h;
  h.channels = bytes[1] == '5' ? 1 : 3;
  h.width = static_cast<int>(next_token());
  h.height = static_cast<int>(next_token());
  const long maxval = next_token();
  if (maxval != 255) throw DataError("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError("malformed PNM header");
  h.data_offset = pos + 1;
  return h;
}

}  // namespace

ImageBuffer read_image(const fs::path& path) {
  const auto bytes = slurp(path);
  try {
    const PnmHeader h = parse_pnm_header(bytes);
    ImageBuffer img;
    img.height = h.height;
    img.width = h.width;
    img.channels = h.channels;
    const std::size_t n = static_cast<std::size_t>(h.height) * h.width * h.channels;
    if (bytes.size() < h.data_offset + n) throw DataError("truncated PNM payload");
    img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset + n));
    return img;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_image(const fs::path& path, const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3) throw UsageError("image must have 1 or 3 channels");
  if (img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels)
    throw UsageError("image buffer size does not match dimensions");
  std::string header = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  spill(path, out.data(), out.size());
}

SaliencyMap read_mask(const fs::path& path) {
  const ImageBuffer img = read_image(path);
  if (img.channels != 1) throw DataError(path.string() + ": color file where a grayscale mask was expected");
  SaliencyMap m(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) m(r, c) = img.at(r, c) / 255.0;
  return m;
}

ImageBuffer saliency_to_image(const SaliencyMap& s) {
  ImageBuffer img(static_cast<int>(s.rows()), static_cast<int>(s.cols()), 1);
  for (Eigen::Index r = 0; r < s.rows(); ++r)
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
      const double v = std::clamp(s(r, c), 0.0, 1.0);
      img.at(static_cast<int>(r), static_cast<int>(c)) = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
    }
  return img;
}

void write_saliency_pgm(const fs::path& path, const SaliencyMap& s) { write_image(path, saliency_to_image(s)); }

void write_mask_pgm(const fs::path& path, const BinaryMask& m) {
  ImageBuffer img(static_cast<int>(m.rows()), static_cast<int>(m.cols()), 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      img.at(static_cast<int>(r), static_cast<int>(c)) = m(r, c) ? 255 : 0;
  write_image(path, img);
}

// --- manifests --------------------------------------------------------------

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<ManifestEntry> DatasetManifest::with_split(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const ManifestEntry& e) { return e.split == s; });
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) { spill(path, text.data(), text.size()); }

DatasetManifest load_manifest(const fs::path& path, bool check_files) {
  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  int lineno = 0;
  for (const auto& raw : read_lines(path)) {
    ++lineno;
    const std::string line = strip(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (cols.size() < 3 || cols.size() > 4) throw DataError(where + "expected 3 or 4 tab-separated columns");
    ManifestEntry e;
    if (cols[0] == "train") e.split = Split::Train;
    else if (cols[0] == "val") e.split = Split::Val;
    else if (cols[0] == "test") e.split = Split::Test;
    else throw DataError(where + "unknown split '" + cols[0] + "'");
    e.embedding = resolve(base, strip(cols[1]));
    e.mask = resolve(base, strip(cols[2]));
    if (cols.size() == 4 && !strip(cols[3]).empty()) e.caption = resolve(base, strip(cols[3]));

    if (check_files) {
      try {
        const auto h = read_array_header(e.embedding);
        if (h.shape.size() != 2 || h.shape[1] == 0)
          throw DataError(e.embedding.string() + ": embedding must be a 2-D token matrix");
        if (h.dtype == DType::U8) throw DataError(e.embedding.string() + ": embedding must be floating point");
        std::ifstream mask(e.mask, std::ios::binary);
        char magic[2] = {0, 0};
        if (!mask || !mask.read(magic, 2) || magic[0] != 'P' || magic[1] != '5')
          throw DataError(e.mask.string() + ": not a binary PGM mask");
        if (e.caption) read_array_header(*e.caption);
      } catch (const DataError& err) {
        throw DataError(where + err.what());
      }
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

std::vector<std::vector<fs::path>> read_path_table(const fs::path& path, std::size_t min_cols,
                                                   std::size_t max_cols) {
  const fs::path base = path.parent_path();
  std::vector<std::vector<fs::path>> rows;
  int lineno = 0;
  for (const auto& raw : read_lines(path)) {
    ++lineno;
    const std::string line = strip(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split_tabs(line);
    if (cols.size() < min_cols || cols.size() > max_cols)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
    std::vector<fs::path> row;
    for (const auto& c : cols)
      if (!strip(c).empty()) row.push_back(resolve(base, strip(c)));
    if (row.size() < min_cols) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty column");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace grasp
