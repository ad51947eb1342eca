#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace maeanom {

using Scalar = double;

/// Row-major so that a flattened patch or token row is contiguous.
template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVectorT = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Matrix = MatrixT<Scalar>;
using RowVector = RowVectorT<Scalar>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A single-channel slice, intensities nominally in [0, 1].
using Image = Matrix;

enum class Label : int { normal = 0, abnormal = 1 };

// Error hierarchy. Each stage throws one of these; the CLI maps them to a
// nonzero exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DataContaminationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IncompleteRunError : public Error {
public:
    using Error::Error;
};

}  // namespace maeanom
