#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace widthlab {

// Binary matrix container: magic "WLAB1", one dtype byte (0 = f64, 1 = c128,
// 2 = i8), u64 rows, u64 cols, then row-major little-endian payload.
enum class WlabDtype : std::uint8_t { F64 = 0, C128 = 1, I8 = 2 };

struct LoadedMatrix {
  WlabDtype dtype = WlabDtype::F64;
  Eigen::MatrixXd real;      // filled for F64 and I8
  Eigen::MatrixXcd complex;  // filled for C128
  bool is_complex() const { return dtype == WlabDtype::C128; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
};

void save_wlab(const std::string& path, const Eigen::MatrixXd& a, bool as_int8 = false);
void save_wlab(const std::string& path, const Eigen::MatrixXcd& a);
LoadedMatrix load_wlab(const std::string& path);

// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

void save_csv(const std::string& path, const Eigen::MatrixXd& a);
std::string matrix_to_csv(const Eigen::MatrixXd& a);

}  // namespace widthlab
