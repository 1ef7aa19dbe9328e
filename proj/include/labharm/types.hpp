#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace labharm {

enum class Field : std::uint8_t { test = 0, sample = 1, unit = 2 };

inline constexpr std::array<Field, 3> kFields{Field::test, Field::sample, Field::unit};

std::string_view to_string(Field f);
Field parse_field(std::string_view s);  // throws UnknownField

/// (test, sample, unit) with every component held in normalized form.
class Triad {
public:
    Triad() = default;
    /// Normalizes all three components. Throws InvalidArgument when the test
    /// name is empty after normalization.
    Triad(std::string_view test, std::string_view sample, std::string_view unit);

    const std::string& test() const { return test_; }
    const std::string& sample() const { return sample_; }
    const std::string& unit() const { return unit_; }
    const std::string& get(Field f) const;

    /// Copy with one component replaced (normalized).
    Triad with(Field f, std::string_view value) const;

    friend bool operator==(const Triad&, const Triad&) = default;
    friend auto operator<=>(const Triad&, const Triad&) = default;

private:
    std::string test_;
    std::string sample_;
    std::string unit_;
};

struct ReferenceRecord {
    std::string id;
    Triad triad;
    std::string labcode;
    std::string preferred_unit;
    double conversion_factor = 1.0;
    std::vector<std::string> synonyms;  // alternative test names, normalized
};

struct QueryStats {
    double min = 0, max = 0, mean = 0, std = 0;
};

struct QueryRecord {
    std::string id;
    Triad triad;
    std::optional<std::string> code_hint;
    std::uint64_t frequency = 0;
    std::optional<QueryStats> stats;
};

/// Fusion parameters [alpha, beta, w_test, w_sample, w_unit].
struct WeightVector {
    double alpha = 1.0;
    double beta = 1.0;
    double w_test = 1.0;
    double w_sample = 1.0;
    double w_unit = 1.0;

    static constexpr double kFusionMax = 10.0;
    static constexpr double kFieldMax = 5.0;

    double field(Field f) const;
    bool within_bounds() const;
    /// Throws InvalidArgument when a component leaves its bound.
    void validate() const;

    std::array<double, 5> to_array() const { return {alpha, beta, w_test, w_sample, w_unit}; }
    static WeightVector from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

    friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

enum class TagStatus : std::uint8_t { Missing, Verified, Pending, Human, Copy, Reranked };

std::string_view to_string(TagStatus t);
/// Exact match on the six status names; throws ParseError otherwise.
TagStatus parse_tag_status(std::string_view s);

}  // namespace labharm
