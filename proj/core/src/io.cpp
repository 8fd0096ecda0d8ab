#include "widthlab/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace widthlab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "WLAB1 serialization assumes a little-endian host");

constexpr char kMagic[5] = {'W', 'L', 'A', 'B', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

void write_header(std::ofstream& out, WlabDtype dtype, std::uint64_t rows,
                  std::uint64_t cols) {
  out.write(kMagic, sizeof(kMagic));
  const auto d = static_cast<std::uint8_t>(dtype);
  out.write(reinterpret_cast<const char*>(&d), 1);
  write_u64(out, rows);
  write_u64(out, cols);
}

}  // namespace

Eigen::Index LoadedMatrix::rows() const {
  return is_complex() ? complex.rows() : real.rows();
}

Eigen::Index LoadedMatrix::cols() const {
  return is_complex() ? complex.cols() : real.cols();
}

void save_wlab(const std::string& path, const Eigen::MatrixXd& a, bool as_int8) {
  std::ofstream out = open_out(path);
  if (as_int8) {
    write_header(out, WlabDtype::I8, static_cast<std::uint64_t>(a.rows()),
                 static_cast<std::uint64_t>(a.cols()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double v = a(i, j);
        const auto q = static_cast<std::int64_t>(v);
        if (static_cast<double>(q) != v || q < -128 || q > 127)
          throw std::invalid_argument("save_wlab: entry not representable as i8");
        const auto b = static_cast<std::int8_t>(q);
        out.write(reinterpret_cast<const char*>(&b), 1);
      }
  } else {
    write_header(out, WlabDtype::F64, static_cast<std::uint64_t>(a.rows()),
                 static_cast<std::uint64_t>(a.cols()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double v = a(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_wlab(const std::string& path, const Eigen::MatrixXcd& a) {
  std::ofstream out = open_out(path);
  write_header(out, WlabDtype::C128, static_cast<std::uint64_t>(a.rows()),
               static_cast<std::uint64_t>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double re = a(i, j).real();
      const double im = a(i, j).imag();
      out.write(reinterpret_cast<const char*>(&re), sizeof(re));
      out.write(reinterpret_cast<const char*>(&im), sizeof(im));
    }
  if (!out) throw std::runtime_error("write failed: " + path);
}

LoadedMatrix load_wlab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_wlab: bad magic in " + path);
  std::uint8_t dtype_byte = 0;
  in.read(reinterpret_cast<char*>(&dtype_byte), 1);
  if (dtype_byte > 2) throw std::runtime_error("load_wlab: unknown dtype");
  const auto dtype = static_cast<WlabDtype>(dtype_byte);
  const std::uint64_t rows = read_u64(in);
  const std::uint64_t cols = read_u64(in);
  if (!in) throw std::runtime_error("load_wlab: truncated header");
  if (rows > (1ull << 32) || cols > (1ull << 32) ||
      (rows != 0 && cols > (1ull << 32) / rows))
    throw std::runtime_error("load_wlab: implausible shape");

  LoadedMatrix loaded;
  loaded.dtype = dtype;
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  if (dtype == WlabDtype::C128) {
    loaded.complex.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) {
        double re = 0, im = 0;
        in.read(reinterpret_cast<char*>(&re), sizeof(re));
        in.read(reinterpret_cast<char*>(&im), sizeof(im));
        loaded.complex(i, j) = {re, im};
      }
  } else if (dtype == WlabDtype::F64) {
    loaded.real.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        loaded.real(i, j) = v;
      }
  } else {
    loaded.real.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) {
        std::int8_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 1);
        loaded.real(i, j) = v;
      }
  }
  if (!in) throw std::runtime_error("load_wlab: truncated payload in " + path);
  return loaded;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string matrix_to_csv(const Eigen::MatrixXd& a) {
  std::string out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out.push_back(',');
      out += format_double(a(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

void save_csv(const std::string& path, const Eigen::MatrixXd& a) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << matrix_to_csv(a);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace widthlab
