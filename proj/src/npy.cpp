#include "gel/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <regex>

namespace gel {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

static_assert(std::endian::native == std::endian::little,
              "NPY reader assumes a little-endian host");

[[noreturn]] void malformed(const std::string& why) {
  throw GelError(ErrorCode::Parse, "malformed NPY: " + why);
}

}  // namespace

Matrix parse_npy(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, kMagicLen) != std::string_view(kMagic, kMagicLen)) {
    malformed("bad magic string");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) malformed("only version 1.0 is supported");
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + header_len) malformed("truncated header");
  const std::string header(bytes.substr(10, header_len));

  std::smatch match;
  if (!std::regex_search(header, match, std::regex(R"('descr'\s*:\s*'([^']*)')"))) {
    malformed("missing descr");
  }
  const std::string descr = match[1];
  std::size_t item = 0;
  if (descr == "<f8") {
    item = 8;
  } else if (descr == "<f4") {
    item = 4;
  } else {
    malformed("unsupported dtype " + descr + " (expected <f4 or <f8)");
  }
  if (!std::regex_search(header, match, std::regex(R"('fortran_order'\s*:\s*(True|False))"))) {
    malformed("missing fortran_order");
  }
  if (match[1] == "True") malformed("Fortran-ordered arrays are not supported");
  if (!std::regex_search(header, match, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    malformed("missing shape");
  }
  std::vector<long long> dims;
  const std::string shape = match[1];
  std::regex number(R"(\d+)");
  for (auto it = std::sregex_iterator(shape.begin(), shape.end(), number);
       it != std::sregex_iterator(); ++it) {
    dims.push_back(std::stoll(it->str()));
  }
  if (dims.size() != 2) malformed("array must be 2-D");

  const auto rows = static_cast<Index>(dims[0]);
  const auto cols = static_cast<Index>(dims[1]);
  const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  const std::size_t offset = 10 + header_len;
  if (bytes.size() < offset + count * item) malformed("truncated data");

  Matrix out(rows, cols);
  const char* data = bytes.data() + offset;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const std::size_t k = static_cast<std::size_t>(r * cols + c);
      if (item == 8) {
        double v;
        std::memcpy(&v, data + k * 8, 8);
        out(r, c) = v;
      } else {
        float v;
        std::memcpy(&v, data + k * 4, 4);
        out(r, c) = v;
      }
    }
  }
  return out;
}

std::string encode_npy(const Matrix& matrix) {
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                       std::to_string(matrix.rows()) + ", " + std::to_string(matrix.cols()) +
                       "), }";
  // Pad so the data starts on a 64-byte boundary; the header ends in '\n'.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xff));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
  out += header;
  const std::size_t offset = out.size();
  out.resize(offset + static_cast<std::size_t>(matrix.size()) * 8);
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      const double v = matrix(r, c);
      std::memcpy(out.data() + offset + static_cast<std::size_t>(r * matrix.cols() + c) * 8, &v, 8);
    }
  }
  return out;
}

Matrix read_npy(const std::string& path) { return parse_npy(read_file(path)); }

void write_npy(const std::string& path, const Matrix& matrix) {
  write_file(path, encode_npy(matrix));
}

}  // namespace gel
