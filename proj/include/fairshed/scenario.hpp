#ifndef FAIRSHED_SCENARIO_HPP
#define FAIRSHED_SCENARIO_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "caseio.hpp"

namespace fairshed {

/// k damaged lines (1-based ids, ascending) plus their colex rank.
struct DamageScenario {
    std::vector<int> line_ids;
    std::uint64_t ordinal = 0;

    friend bool operator==(const DamageScenario&, const DamageScenario&) = default;
};

/// C(n, k) with saturation at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t num = n - k + i;
        // r * num / i stays integral at every step
        const std::uint64_t g = std::gcd(r, i);
        const std::uint64_t rr = r / g, ii = i / g;
        const std::uint64_t nn = num / ii;
        if (rr > std::numeric_limits<std::uint64_t>::max() / nn) return std::numeric_limits<std::uint64_t>::max();
        r = rr * nn;
    }
    return r;
}

/// Colex rank of a sorted 1-based combination: sum of C(c_i - 1, i).
inline std::uint64_t colex_rank(const std::vector<int>& ids) {
    std::uint64_t r = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) r += binomial(static_cast<std::uint64_t>(ids[i] - 1), i + 1);
    return r;
}

/// Inverse of colex_rank.
inline DamageScenario colex_unrank(int n_lines, int k, std::uint64_t ordinal) {
    if (k < 1 || k > n_lines) throw std::invalid_argument("k out of range");
    if (ordinal >= binomial(static_cast<std::uint64_t>(n_lines), static_cast<std::uint64_t>(k)))
        throw std::invalid_argument("scenario ordinal out of range");
    DamageScenario s;
    s.ordinal = ordinal;
    s.line_ids.resize(static_cast<std::size_t>(k));
    std::uint64_t rest = ordinal;
    int hi = n_lines;
    for (int i = k; i >= 1; --i) {
        int c = hi;
        while (binomial(static_cast<std::uint64_t>(c - 1), static_cast<std::uint64_t>(i)) > rest) --c;
        s.line_ids[static_cast<std::size_t>(i - 1)] = c;
        rest -= binomial(static_cast<std::uint64_t>(c - 1), static_cast<std::uint64_t>(i));
        hi = c - 1;
    }
    return s;
}

/// Lazy colex enumeration of all k-subsets of {1..n}.
class DamageEnumerator {
public:
    DamageEnumerator(int n_lines, int k) : n_(n_lines), k_(k) {
        if (k < 1 || k > n_lines) throw std::invalid_argument("k out of range: need 1 <= k <= number of lines");
        cur_.resize(static_cast<std::size_t>(k));
        std::iota(cur_.begin(), cur_.end(), 1);
    }

    std::uint64_t size() const { return binomial(static_cast<std::uint64_t>(n_), static_cast<std::uint64_t>(k_)); }

    std::optional<DamageScenario> next() {
        if (done_) return std::nullopt;
        DamageScenario out{cur_, ordinal_++};
        advance();
        return out;
    }

    std::vector<DamageScenario> collect() {
        std::vector<DamageScenario> all;
        while (auto s = next()) all.push_back(std::move(*s));
        return all;
    }

private:
    void advance() {
        // colex successor: bump the first element that can move without colliding
        std::size_t i = 0;
        const auto k = cur_.size();
        while (i < k) {
            const int limit = (i + 1 < k) ? cur_[i + 1] - 1 : n_;
            if (cur_[i] < limit) break;
            ++i;
        }
        if (i == k) {
            done_ = true;
            return;
        }
        ++cur_[i];
        for (std::size_t j = 0; j < i; ++j) cur_[j] = static_cast<int>(j) + 1;
    }

    int n_;
    int k_;
    std::vector<int> cur_;
    std::uint64_t ordinal_ = 0;
    bool done_ = false;
};

inline DamageEnumerator enumerate_damage(const Network& net, int k) {
    return DamageEnumerator(static_cast<int>(net.lines.size()), k);
}

/// `count` distinct scenarios drawn uniformly without replacement, sorted by ordinal.
inline std::vector<DamageScenario> sample_damage(const Network& net, int k, std::uint64_t count, std::uint64_t seed) {
    const int n = static_cast<int>(net.lines.size());
    if (k < 1 || k > n) throw std::invalid_argument("k out of range: need 1 <= k <= number of lines");
    const std::uint64_t total = binomial(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k));
    count = std::min(count, total);
    // Floyd's algorithm
    std::mt19937_64 rng(seed);
    std::set<std::uint64_t> picked;
    for (std::uint64_t j = total - count; j < total; ++j) {
        std::uniform_int_distribution<std::uint64_t> dist(0, j);
        const std::uint64_t t = dist(rng);
        if (!picked.insert(t).second) picked.insert(j);
    }
    std::vector<DamageScenario> out;
    out.reserve(picked.size());
    for (auto o : picked) out.push_back(colex_unrank(n, k, o));
    return out;
}

/// Network with a set of lines removed and its islands identified.
class DamagedNetwork {
public:
    const Network& base() const { return *base_; }
    const DamageScenario& removed() const { return removed_; }
    bool line_alive(std::size_t line_pos) const { return alive_[line_pos]; }

    /// Bus ids per component, each sorted; components ordered by smallest bus id.
    const std::vector<std::vector<int>>& components() const { return components_; }
    const std::vector<int>& reference_bus_per_component() const { return reference_; }
    /// Component number of the bus at position `bus_pos` in base().buses.
    int component_of(std::size_t bus_pos) const { return component_of_[bus_pos]; }

    std::size_t surviving_line_count() const {
        return static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), true));
    }

private:
    friend DamagedNetwork apply_damage(const Network&, const DamageScenario&);
    const Network* base_ = nullptr;
    DamageScenario removed_;
    std::vector<bool> alive_;
    std::vector<int> component_of_;
    std::vector<std::vector<int>> components_;
    std::vector<int> reference_;
};

/// `net` must outlive the returned object.
inline DamagedNetwork apply_damage(const Network& net, const DamageScenario& scenario) {
    DamagedNetwork dn;
    dn.base_ = &net;
    dn.removed_ = scenario;
    dn.alive_.assign(net.lines.size(), true);
    for (int id : scenario.line_ids) {
        if (id < 1 || id > static_cast<int>(net.lines.size()))
            throw std::invalid_argument("damage scenario references unknown line " + std::to_string(id));
        dn.alive_[static_cast<std::size_t>(id - 1)] = false;
    }

    const std::size_t nb = net.buses.size();
    std::vector<int> parent(nb);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        if (!dn.alive_[l]) continue;
        const int a = find(net.bus_index(net.lines[l].from_bus));
        const int b = find(net.bus_index(net.lines[l].to_bus));
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }

    // order components by their smallest bus id
    std::vector<std::size_t> order(nb);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return net.buses[a].id < net.buses[b].id; });
    std::vector<int> root_to_comp(nb, -1);
    dn.component_of_.assign(nb, -1);
    for (std::size_t pos : order) {
        const int r = find(static_cast<int>(pos));
        if (root_to_comp[static_cast<std::size_t>(r)] < 0) {
            root_to_comp[static_cast<std::size_t>(r)] = static_cast<int>(dn.components_.size());
            dn.components_.emplace_back();
        }
        const int c = root_to_comp[static_cast<std::size_t>(r)];
        dn.component_of_[pos] = c;
        dn.components_[static_cast<std::size_t>(c)].push_back(net.buses[pos].id);
    }

    std::vector<bool> has_gen(nb, false);
    for (const auto& g : net.generators) has_gen[static_cast<std::size_t>(net.bus_index(g.bus))] = true;
    dn.reference_.reserve(dn.components_.size());
    for (const auto& comp : dn.components_) {
        int ref = comp.front();
        for (int id : comp) {
            if (has_gen[static_cast<std::size_t>(net.bus_index(id))]) {
                ref = id;
                break;
            }
        }
        dn.reference_.push_back(ref);
    }
    return dn;
}

/// One `ordinal,line_id_1,...,line_id_k` row per scenario, with header.
template <class Range>
void write_scenarios_csv(std::ostream& os, const Range& scenarios, int k) {
    os << "ordinal";
    for (int i = 1; i <= k; ++i) os << ",line_id_" << i;
    os << '\n';
    for (const DamageScenario& s : scenarios) {
        os << s.ordinal;
        for (int id : s.line_ids) os << ',' << id;
        os << '\n';
    }
}

}  // namespace fairshed

#endif  // FAIRSHED_SCENARIO_HPP
