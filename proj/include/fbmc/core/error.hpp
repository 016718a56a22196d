#ifndef FBMC_CORE_ERROR_HPP
#define FBMC_CORE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace fbmc {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. Carries the file and 1-based row
/// (header is row 1) when the problem came from a CSV file.
class DataError : public Error {
public:
  DataError(std::string file, std::size_t row, const std::string& what)
      : Error(format(file, row, what)), file_(std::move(file)), row_(row) {}
  explicit DataError(const std::string& what) : Error(what) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t row() const noexcept { return row_; }

private:
  static std::string format(const std::string& file, std::size_t row,
                            const std::string& what) {
    std::string out = file;
    if (row > 0) out += ":" + std::to_string(row);
    return out + ": " + what;
  }

  std::string file_;
  std::size_t row_ = 0;
};

/// Topology problems (disconnected graph, singular susceptance matrix).
class StructuralError : public Error {
public:
  using Error::Error;
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// An optimization problem without a feasible point. `binding` lists the
/// constraint labels carrying the weight of the infeasibility certificate.
class InfeasibleError : public Error {
public:
  InfeasibleError(const std::string& what, int timestep,
                  std::vector<std::string> binding)
      : Error(what), timestep_(timestep), binding_(std::move(binding)) {}

  int timestep() const noexcept { return timestep_; }
  const std::vector<std::string>& binding() const noexcept { return binding_; }

private:
  int timestep_;
  std::vector<std::string> binding_;
};

/// The solver stopped without an optimality or infeasibility certificate.
class SolverError : public Error {
public:
  using Error::Error;
};

}  // namespace fbmc

#endif  // FBMC_CORE_ERROR_HPP
