#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace amod {

/// Base class of every error raised by the library. `exit_code()` is the
/// process status the command-line tool reports for it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Cholesky failure after jitter escalation, non-finite likelihoods.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class SolverError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class InfeasibleError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Time limit reached before any integer solution was found.
class NoSolutionError : public SolverError {
 public:
  using SolverError::SolverError;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Dense row-major matrix, used for the small N x N station tables.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Station x station x horizon-step tensor.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n, std::size_t steps, T fill = T{})
      : n_(n), steps_(steps), data_(n * n * steps, fill) {}

  std::size_t stations() const noexcept { return n_; }
  std::size_t steps() const noexcept { return steps_; }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(k * n_ + i) * n_ + j];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(k * n_ + i) * n_ + j];
  }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t steps_ = 0;
  std::vector<T> data_;
};

}  // namespace amod
