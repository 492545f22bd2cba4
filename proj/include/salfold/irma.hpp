#ifndef SALFOLD_IRMA_HPP
#define SALFOLD_IRMA_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/util.hpp"

namespace salfold {

// ------------------------------------------------------------------ IrmaCode

/// 13-character hierarchical label over four axes:
/// T (technical, 4 chars), D (direction, 3), A (anatomy, 3), B (biology, 3).
/// Characters are 0-9 and a-z; '*' is tolerated as an "unspecified" marker
/// that never matches during scoring.
struct IrmaCode {
    std::array<std::string, 4> axes; // T, D, A, B

    std::string canonical() const {
        return axes[0] + "-" + axes[1] + "-" + axes[2] + "-" + axes[3];
    }
    std::string bare() const { return axes[0] + axes[1] + axes[2] + axes[3]; }

    char at(int axis, int pos) const { return axes[axis][static_cast<std::size_t>(pos)]; }

    bool operator==(const IrmaCode& o) const { return axes == o.axes; }
    bool operator<(const IrmaCode& o) const { return axes < o.axes; }
};

inline constexpr std::array<int, 4> kIrmaAxisLength = {4, 3, 3, 3};
inline constexpr const char* kIrmaAxisName[4] = {"T", "D", "A", "B"};

namespace detail {
inline bool irma_char_ok(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || c == '*';
}
} // namespace detail

/// Accepts "TTTT-DDD-AAA-BBB" or the bare 13-character form; letters are
/// lowercased.
inline IrmaCode parse_code(const std::string& input) {
    std::string s = to_lower(trim(input));
    if (s.size() == 16) {
        if (s[4] != '-' || s[8] != '-' || s[12] != '-')
            raise(Errc::bad_axis_structure, "expected hyphens at positions 5, 9, 13 in '" + input + "'");
        s = s.substr(0, 4) + s.substr(5, 3) + s.substr(9, 3) + s.substr(13, 3);
    } else if (s.size() != 13) {
        raise(Errc::bad_length, "IRMA code '" + input + "' has " + std::to_string(s.size()) +
                                    " characters, expected 13 (or 16 with hyphens)");
    }
    if (s.find('-') != std::string::npos)
        raise(Errc::bad_axis_structure, "misplaced hyphen in '" + input + "'");
    for (char c : s)
        if (!detail::irma_char_ok(c))
            raise(Errc::bad_character, std::string("character '") + c + "' in '" + input + "'");
    IrmaCode code;
    std::size_t off = 0;
    for (int a = 0; a < 4; ++a) {
        code.axes[a] = s.substr(off, static_cast<std::size_t>(kIrmaAxisLength[a]));
        off += static_cast<std::size_t>(kIrmaAxisLength[a]);
    }
    return code;
}

// -------------------------------------------------------- PositionVocabulary

/// Per axis-position character sets observed in the training codes;
/// b(axis, pos) is the label-space size used by the error score.
struct PositionVocabulary {
    std::array<std::vector<std::set<char>>, 4> seen;

    int b(int axis, int pos) const {
        return static_cast<int>(seen[axis][static_cast<std::size_t>(pos)].size());
    }
    bool contains(int axis, int pos, char c) const {
        return seen[axis][static_cast<std::size_t>(pos)].count(c) > 0;
    }
};

inline PositionVocabulary build_vocabulary(const std::vector<IrmaCode>& codes) {
    if (codes.empty()) raise(Errc::empty_input, "no codes to build a vocabulary from");
    PositionVocabulary v;
    for (int a = 0; a < 4; ++a) v.seen[a].resize(static_cast<std::size_t>(kIrmaAxisLength[a]));
    for (const auto& c : codes)
        for (int a = 0; a < 4; ++a)
            for (int p = 0; p < kIrmaAxisLength[a]; ++p)
                v.seen[a][static_cast<std::size_t>(p)].insert(c.at(a, p));
    return v;
}

// ----------------------------------------------------------------- ErrorScore

/// Hierarchical classification error. Per axis the raw penalty is
/// sum over positions i (1-based) of (1/b_i)(1/i)[mismatch], rescaled so the
/// all-wrong axis scores 0.25; the four axes sum to at most 1.
struct ErrorScore {
    std::array<double, 4> axis_error = {0, 0, 0, 0};
    double total = 0.0;
    int vocabulary_gaps = 0; // predicted characters unseen at their position
};

/// When `propagate_errors` is set, a mismatch makes all deeper positions of
/// that axis count as wrong too (the evaluation-campaign convention); the
/// default scores each position independently.
inline ErrorScore error_score(const IrmaCode& truth, const IrmaCode& predicted,
                              const PositionVocabulary& vocab, bool propagate_errors = false) {
    ErrorScore out;
    for (int a = 0; a < 4; ++a) {
        double raw = 0.0, raw_max = 0.0;
        bool wrong_above = false;
        for (int p = 0; p < kIrmaAxisLength[a]; ++p) {
            const int b = vocab.b(a, p);
            if (b < 1) raise(Errc::empty_input, "vocabulary has no labels at an axis position");
            const double weight = (1.0 / b) * (1.0 / (p + 1));
            raw_max += weight;
            const char t = truth.at(a, p);
            const char q = predicted.at(a, p);
            if (!vocab.contains(a, p, q)) ++out.vocabulary_gaps;
            bool differ = (t != q) || t == '*' || q == '*';
            if (propagate_errors && wrong_above) differ = true;
            if (differ) {
                raw += weight;
                wrong_above = true;
            }
        }
        out.axis_error[a] = 0.25 * raw / raw_max;
        out.total += out.axis_error[a];
    }
    return out;
}

// ---------------------------------------------------------------- run scoring

struct RunSummary {
    std::vector<double> per_image;
    std::array<double, 4> axis_sum = {0, 0, 0, 0};
    double sum = 0.0;
    double mean = 0.0;
    int vocabulary_gaps = 0;
};

inline RunSummary evaluate_run(const std::vector<IrmaCode>& truths,
                               const std::vector<IrmaCode>& predictions,
                               const PositionVocabulary& vocab, bool propagate_errors = false) {
    if (truths.size() != predictions.size())
        raise(Errc::length_mismatch, std::to_string(truths.size()) + " truths vs " +
                                         std::to_string(predictions.size()) + " predictions");
    if (truths.empty()) raise(Errc::empty_input, "empty run");
    RunSummary s;
    s.per_image.reserve(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const ErrorScore e = error_score(truths[i], predictions[i], vocab, propagate_errors);
        s.per_image.push_back(e.total);
        for (int a = 0; a < 4; ++a) s.axis_sum[a] += e.axis_error[a];
        s.sum += e.total; // index order, for bit-stable totals
        s.vocabulary_gaps += e.vocabulary_gaps;
    }
    s.mean = s.sum / static_cast<double>(truths.size());
    return s;
}

/// Machine-readable one-liner appended to every evaluation report.
inline std::string summary_line(const RunSummary& s) {
    std::ostringstream os;
    os << "TOTAL " << fmt_double(s.sum) << " MEAN " << fmt_double(s.mean) << " N "
       << s.per_image.size();
    return os.str();
}

inline void write_report(std::ostream& os, const std::vector<std::string>& ids,
                         const std::vector<IrmaCode>& truths,
                         const std::vector<IrmaCode>& predictions, const RunSummary& s) {
    std::size_t idw = 8;
    for (const auto& id : ids) idw = std::max(idw, id.size());
    os << std::left << std::setw(static_cast<int>(idw) + 2) << "image" << std::setw(18)
       << "truth" << std::setw(18) << "predicted" << "error\n";
    for (std::size_t i = 0; i < truths.size(); ++i) {
        os << std::left << std::setw(static_cast<int>(idw) + 2) << ids[i] << std::setw(18)
           << truths[i].canonical() << std::setw(18) << predictions[i].canonical()
           << fmt_double(s.per_image[i]) << "\n";
    }
    os << "axis sums: T " << fmt_double(s.axis_sum[0]) << "  D " << fmt_double(s.axis_sum[1])
       << "  A " << fmt_double(s.axis_sum[2]) << "  B " << fmt_double(s.axis_sum[3]) << "\n";
    if (s.vocabulary_gaps > 0)
        os << "note: " << s.vocabulary_gaps
           << " predicted characters were outside the training vocabulary\n";
    os << summary_line(s) << "\n";
}

} // namespace salfold

#endif
