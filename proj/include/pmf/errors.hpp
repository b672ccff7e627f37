#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pmf {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file (bad header, counts, unparsable tokens).
struct ParseError : Error {
    using Error::Error;
};

/// Structurally invalid input (out-of-range index, degenerate face,
/// disconnected mesh, asymmetric matrix, ...).
struct ValidationError : Error {
    using Error::Error;
};

/// Bad arguments to an operation (non-monotone level sizes, n too large
/// for a brute-force solve, ...).
struct UsageError : Error {
    using Error::Error;
};

/// A dense n-by-n request exceeded the configured size cap.
struct SizeCapError : Error {
    using Error::Error;
};

/// A weight mask row ended up with no allowed columns.
struct InfeasibleMaskError : Error {
    InfeasibleMaskError(std::string msg, int row, std::vector<int> nearest)
        : Error(std::move(msg)), row(row), nearest_coarse(std::move(nearest)) {}
    int row;
    std::vector<int> nearest_coarse;
};

/// The masked assignment admits no perfect matching. Carries a
/// Hall-violating row set and its joint column neighborhood.
struct InfeasibleAssignmentError : Error {
    InfeasibleAssignmentError(std::string msg, std::vector<int> rows, std::vector<int> cols)
        : Error(std::move(msg)), rows(std::move(rows)), columns(std::move(cols)) {}
    std::vector<int> rows;
    std::vector<int> columns;
};

/// Solver gave up (round budget exhausted, maximizer not bracketed, ...).
struct SolverError : Error {
    using Error::Error;
};

}  // namespace pmf
