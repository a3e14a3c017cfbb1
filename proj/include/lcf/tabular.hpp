#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lcf {

struct Variable {
    std::string name;
    int cardinality = 2;

    friend bool operator==(const Variable&, const Variable&) = default;
};

/// Mixed-radix, row-major indexing: the first axis varies slowest.
class StateIndexer {
public:
    StateIndexer() = default;
    explicit StateIndexer(std::vector<int> cardinalities);
    explicit StateIndexer(const std::vector<Variable>& vars);

    std::size_t size() const noexcept { return size_; }
    std::size_t rank() const noexcept { return cards_.size(); }
    int cardinality(std::size_t axis) const { return cards_[axis]; }
    std::size_t stride(std::size_t axis) const { return strides_[axis]; }
    const std::vector<int>& cardinalities() const noexcept { return cards_; }

    /// Throws std::out_of_range for a bad state.
    std::size_t encode(std::span<const int> state) const;
    void decode(std::size_t index, std::span<int> state) const;
    std::vector<int> decode(std::size_t index) const;

private:
    std::vector<int> cards_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 1;
};

/// Smallest probability a positive table may hold.
inline constexpr double positivity_floor = 1e-12;

/// Exact table p(v | w) over categorical variables, stored as log
/// probabilities. Rows are context states, columns variable states, both in
/// row-major order over the declared variable order. Immutable once built.
class TabularDistribution {
public:
    /// Validates shape, per-context normalization (1e-9) and, when `positive`,
    /// that every entry exceeds log(1e-12).
    TabularDistribution(std::vector<Variable> variables, std::vector<Variable> context,
                        std::vector<double> log_table, bool positive = true);

    static TabularDistribution from_probabilities(std::vector<Variable> variables,
                                                  std::vector<Variable> context,
                                                  const std::vector<double>& probabilities,
                                                  bool positive = true);

    const std::vector<Variable>& variables() const noexcept { return vars_; }
    const std::vector<Variable>& context() const noexcept { return ctx_; }
    const StateIndexer& states() const noexcept { return states_; }
    const StateIndexer& contexts() const noexcept { return contexts_; }
    std::size_t state_count() const noexcept { return states_.size(); }
    std::size_t context_count() const noexcept { return contexts_.size(); }
    bool positive() const noexcept { return positive_; }

    std::span<const double> log_table() const noexcept { return log_table_; }
    /// Log probabilities of one context row.
    std::span<const double> row(std::size_t context_index) const {
        return std::span<const double>(log_table_).subspan(context_index * state_count(), state_count());
    }
    double log_prob(std::size_t context_index, std::size_t state_index) const {
        return log_table_[context_index * state_count() + state_index];
    }

    /// Stored log p(v | w). Throws std::out_of_range for bad states.
    double evaluate(std::span<const int> v_state, std::span<const int> w_state = {}) const;

    /// Position of a variable / context variable; throws for unknown names.
    std::size_t variable_position(const std::string& name) const;
    std::size_t context_position(const std::string& name) const;
    bool has_variable(const std::string& name) const;
    bool has_context(const std::string& name) const;

private:
    std::vector<Variable> vars_;
    std::vector<Variable> ctx_;
    StateIndexer states_;
    StateIndexer contexts_;
    std::vector<double> log_table_;
    bool positive_;
};

/// Designated reference level per variable (defaults to 0).
class ReferenceAssignment {
public:
    ReferenceAssignment() = default;
    explicit ReferenceAssignment(std::map<std::string, int> levels) : levels_(std::move(levels)) {}

    void set(const std::string& name, int level) { levels_[name] = level; }
    int level(const std::string& name) const {
        auto it = levels_.find(name);
        return it == levels_.end() ? 0 : it->second;
    }
    const std::map<std::string, int>& overrides() const noexcept { return levels_; }

    /// Reference levels for `vars`, checked against their cardinalities.
    std::vector<int> levels_for(const std::vector<Variable>& vars) const;

private:
    std::map<std::string, int> levels_;
};

/// Observed rows of category indices with optional positive weights.
struct SampleSet {
    std::vector<std::string> variables;
    std::vector<std::vector<int>> rows;
    std::vector<double> weights;  ///< empty means unit weights

    std::size_t size() const noexcept { return rows.size(); }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
    double total_weight() const;
    /// Column of `name`; throws for unknown names.
    std::size_t column(const std::string& name) const;
    /// Checks every index against the cardinalities of `vars` (which must all be columns).
    void validate(const std::vector<Variable>& vars) const;
};

/// Sums out every variable not in `keep`; the result keeps declaration order.
TabularDistribution marginalize(const TabularDistribution& p, const std::vector<std::string>& keep);

/// Renormalized conditional over the variables not fixed.
TabularDistribution condition_on(const TabularDistribution& p,
                                 const std::vector<std::pair<std::string, int>>& fix);

/// p(target | given) from a joint table as a conditional table whose context
/// is `given`. Axis order follows the argument order.
TabularDistribution to_conditional(const TabularDistribution& joint,
                                   const std::vector<std::string>& target,
                                   const std::vector<std::string>& given);

/// Max over states of |p(a | b, c, w) - p(a | c, w)|. `a` holds variables;
/// `b` and `c` may also name context variables. Every context variable is
/// conditioned on; for context members of `b` the right-hand side is taken
/// with them at level 0, so the statement also says p(a | ...) does not move
/// with them.
double ci_deviation(const TabularDistribution& p, const std::vector<std::string>& a,
                    const std::vector<std::string>& b, const std::vector<std::string>& c);

bool exact_ci_holds(const TabularDistribution& p, const std::vector<std::string>& a,
                    const std::vector<std::string>& b, const std::vector<std::string>& c,
                    double tol);

/// Seeded random positive table: symmetric Dirichlet(concentration) rows from
/// std::mt19937_64 / std::gamma_distribution, mixed with a uniform floor so
/// every entry is at least 1e-6.
TabularDistribution random_positive(const std::vector<Variable>& variables, std::uint64_t seed,
                                    double concentration = 1.0,
                                    const std::vector<Variable>& context = {});

/// Draws n rows. Context states, if any, are drawn uniformly.
SampleSet sample(const TabularDistribution& p, std::size_t n, std::uint64_t seed);

/// Weighted relative frequencies over `vars` (no context); zero cells allowed.
TabularDistribution empirical_distribution(const SampleSet& data, const std::vector<Variable>& vars);

/// Total variation distance between two tables with the same layout
/// (max over contexts).
double total_variation(const TabularDistribution& p, const TabularDistribution& q);

double log_sum_exp(std::span<const double> xs);

} // namespace lcf
