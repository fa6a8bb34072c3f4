#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "treefuse/rng.hpp"

namespace treefuse {

// Received bit vector; one entry per contributing node.
using Codeword = std::vector<std::uint8_t>;

inline std::size_t hamming_distance(const Codeword& a, const Codeword& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("hamming_distance: length mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                    ")");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]) ? 1u : 0u;
    return d;
}

// M x N binary matrix: row m is the codeword transmitted collectively for
// hypothesis m, column j is node j's 1-bit rule.
class CodeMatrix {
  public:
    CodeMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits)
        : rows_(rows), cols_(cols), bits_(std::move(bits)) {
        if (rows_ < 2) throw std::invalid_argument("CodeMatrix: need at least 2 rows");
        if (bits_.size() != rows_ * cols_)
            throw std::invalid_argument("CodeMatrix: bit count does not match dimensions");
        // N >= log2(M) so that M hypotheses are distinguishable with N bits.
        std::size_t need = 0;
        while ((std::size_t{1} << need) < rows_) ++need;
        if (cols_ < need)
            throw std::invalid_argument("CodeMatrix: " + std::to_string(cols_) +
                                        " columns cannot separate " + std::to_string(rows_) +
                                        " hypotheses");
        for (auto b : bits_)
            if (b > 1) throw std::invalid_argument("CodeMatrix: entries must be 0 or 1");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::uint8_t bit(std::size_t row, std::size_t col) const { return bits_[row * cols_ + col]; }
    void set_bit(std::size_t row, std::size_t col, std::uint8_t v) { bits_[row * cols_ + col] = v; }

    Codeword row(std::size_t m) const {
        return Codeword(bits_.begin() + static_cast<std::ptrdiff_t>(m * cols_),
                        bits_.begin() + static_cast<std::ptrdiff_t>((m + 1) * cols_));
    }

    // Row packed into a word, bit j of the mask = column j. Valid for N <= 64.
    std::uint64_t row_mask(std::size_t m) const {
        std::uint64_t mask = 0;
        for (std::size_t j = 0; j < cols_; ++j)
            mask |= static_cast<std::uint64_t>(bits_[m * cols_ + j]) << j;
        return mask;
    }

    bool distinct_rows() const {
        for (std::size_t a = 0; a + 1 < rows_; ++a)
            for (std::size_t b = a + 1; b < rows_; ++b) {
                bool same = true;
                for (std::size_t j = 0; j < cols_ && same; ++j) same = bit(a, j) == bit(b, j);
                if (same) return false;
            }
        return true;
    }

    bool operator==(const CodeMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && bits_ == other.bits_;
    }

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::uint8_t> bits_;
};

// Column encoding used in the matrix file format: each column is an M-bit
// integer read big-endian, most significant bit = row 0. (Decoding 9 with
// M = 4 gives the column (1,0,0,1).)
inline CodeMatrix from_integer_columns(const std::vector<std::uint64_t>& encoded, std::size_t M) {
    if (M < 2 || M > 63) throw std::invalid_argument("from_integer_columns: M out of range");
    const std::uint64_t limit = std::uint64_t{1} << M;
    const std::size_t N = encoded.size();
    std::vector<std::uint8_t> bits(M * N, 0);
    for (std::size_t j = 0; j < N; ++j) {
        if (encoded[j] >= limit)
            throw std::invalid_argument("from_integer_columns: integer " +
                                        std::to_string(encoded[j]) + " does not fit in " +
                                        std::to_string(M) + " bits");
        for (std::size_t m = 0; m < M; ++m)
            bits[m * N + j] = static_cast<std::uint8_t>((encoded[j] >> (M - 1 - m)) & 1u);
    }
    return CodeMatrix(M, N, std::move(bits));
}

inline std::vector<std::uint64_t> to_integer_columns(const CodeMatrix& C) {
    std::vector<std::uint64_t> out(C.cols(), 0);
    for (std::size_t j = 0; j < C.cols(); ++j)
        for (std::size_t m = 0; m < C.rows(); ++m)
            out[j] |= static_cast<std::uint64_t>(C.bit(m, j)) << (C.rows() - 1 - m);
    return out;
}

struct FusionOutcome {
    std::size_t decision = 0;           // hypothesis index, 0-based
    std::size_t tie_count = 1;          // rows attaining the minimum distance
    std::vector<std::size_t> tied_set;  // those rows, ascending
    std::size_t min_distance = 0;
};

// Minimum Hamming distance fusion. Ties are broken uniformly at random,
// consuming exactly one engine draw per tie (none when the minimizer is
// unique), which keeps trial streams reproducible.
template <typename Rng>
FusionOutcome min_hamming_fuse(const CodeMatrix& C, const Codeword& u, Rng& rng) {
    if (u.size() != C.cols())
        throw std::invalid_argument("min_hamming_fuse: codeword length " +
                                    std::to_string(u.size()) + " != matrix columns " +
                                    std::to_string(C.cols()));
    FusionOutcome out;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t m = 0; m < C.rows(); ++m) {
        std::size_t d = 0;
        for (std::size_t j = 0; j < C.cols(); ++j) d += (u[j] != C.bit(m, j)) ? 1u : 0u;
        if (d < best) {
            best = d;
            out.tied_set.clear();
            out.tied_set.push_back(m);
        } else if (d == best) {
            out.tied_set.push_back(m);
        }
    }
    out.min_distance = best;
    out.tie_count = out.tied_set.size();
    out.decision =
        out.tie_count == 1 ? out.tied_set[0] : out.tied_set[uniform_index(rng, out.tie_count)];
    return out;
}

// Minimum pairwise row distance d_min; drives the error exponents of the
// asymptotic bounds.
inline std::size_t min_distance(const CodeMatrix& C) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t a = 0; a + 1 < C.rows(); ++a) {
        const std::uint64_t ma = C.cols() <= 64 ? C.row_mask(a) : 0;
        for (std::size_t b = a + 1; b < C.rows(); ++b) {
            std::size_t d;
            if (C.cols() <= 64) {
                d = static_cast<std::size_t>(std::popcount(ma ^ C.row_mask(b)));
            } else {
                d = 0;
                for (std::size_t j = 0; j < C.cols(); ++j) d += (C.bit(a, j) != C.bit(b, j));
            }
            best = std::min(best, d);
        }
    }
    return best;
}

// Blockwise repetition [C C ... C]; d_min scales by the copy count.
inline CodeMatrix concatenate(const CodeMatrix& C, std::size_t copies) {
    if (copies < 1) throw std::invalid_argument("concatenate: need at least one copy");
    std::vector<std::uint8_t> bits(C.rows() * C.cols() * copies);
    for (std::size_t m = 0; m < C.rows(); ++m)
        for (std::size_t c = 0; c < copies; ++c)
            for (std::size_t j = 0; j < C.cols(); ++j)
                bits[m * C.cols() * copies + c * C.cols() + j] = C.bit(m, j);
    return CodeMatrix(C.rows(), C.cols() * copies, std::move(bits));
}

// Text format: line 1 "M N", line 2 the N column integers.
inline void write_code_matrix(std::ostream& os, const CodeMatrix& C) {
    os << C.rows() << " " << C.cols() << "\n";
    const auto cols = to_integer_columns(C);
    for (std::size_t j = 0; j < cols.size(); ++j) os << (j ? " " : "") << cols[j];
    os << "\n";
}

inline CodeMatrix read_code_matrix(std::istream& is) {
    std::size_t M = 0, N = 0;
    if (!(is >> M >> N)) throw std::invalid_argument("code matrix file: cannot parse header");
    std::vector<std::uint64_t> cols(N);
    for (std::size_t j = 0; j < N; ++j)
        if (!(is >> cols[j]))
            throw std::invalid_argument("code matrix file: expected " + std::to_string(N) +
                                        " column integers");
    return from_integer_columns(cols, M);
}

inline void save_code_matrix(const std::string& path, const CodeMatrix& C) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot open for writing: " + path);
    write_code_matrix(f, C);
}

inline CodeMatrix load_code_matrix(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open code matrix file: " + path);
    return read_code_matrix(f);
}

}  // namespace treefuse
