#ifndef FAIRSHED_CASEIO_HPP
#define FAIRSHED_CASEIO_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fairshed {

/// Raised for malformed or inconsistent case data. `line()` is 0 when the
/// problem is not tied to a particular input line.
class CaseError : public std::runtime_error {
public:
    CaseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct Bus {
    int id = 0;
    bool is_reference = false;
};

struct Line {
    int id = 0;  // 1-based, order of the retained branch rows
    int from_bus = 0;
    int to_bus = 0;
    double reactance_x = 0.0;
    double susceptance_b = 0.0;
    double rating_pmax = std::numeric_limits<double>::infinity();
};

struct Generator {
    int id = 0;
    int bus = 0;
    double p_min = 0.0;
    double p_max = 0.0;
};

struct Load {
    int id = 0;  // 1-based, bus-table row order
    int bus = 0;
    double d_max = 0.0;
    double weight = 1.0;
};

/// Per-unit DC network. Built once by parse_case and treated as immutable.
struct Network {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    /// Position of a bus id in `buses`, or -1.
    int bus_index(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return static_cast<int>(i);
        return -1;
    }

    std::vector<double> load_weights() const {
        std::vector<double> w;
        w.reserve(loads.size());
        for (const auto& l : loads) w.push_back(l.weight);
        return w;
    }

    double total_demand() const {
        double s = 0.0;
        for (const auto& l : loads) s += l.d_max;
        return s;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string_view strip_comment(std::string_view s) {
    // '%' inside quotes does not occur in the matrices we read
    auto p = s.find('%');
    return p == std::string_view::npos ? s : s.substr(0, p);
}

inline double parse_number(std::string_view tok, std::size_t line) {
    std::string t(tok);
    if (t == "Inf" || t == "inf") return std::numeric_limits<double>::infinity();
    if (t == "-Inf" || t == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw CaseError("syntax error: expected number, got '" + t + "'", line);
    }
    if (used != t.size()) throw CaseError("syntax error: expected number, got '" + t + "'", line);
    return v;
}

struct RawMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines;
    std::size_t first_line = 0;
};

}  // namespace detail

/// Parses the subset of the MATPOWER format needed for DC load shedding:
/// `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch`. Everything else is skipped.
inline Network parse_case(std::string_view text) {
    using detail::RawMatrix;
    std::map<std::string, RawMatrix> matrices;
    double base_mva = std::numeric_limits<double>::quiet_NaN();
    bool have_base = false;

    std::string current;  // matrix being read, empty when outside
    bool skipping = false;  // inside an unrecognized [..] or {..} block
    char skip_close = ']';
    RawMatrix* target = nullptr;
    std::vector<double> pending;
    std::size_t pending_line = 0;

    auto flush_row = [&](std::size_t line) {
        if (pending.empty()) return;
        target->rows.push_back(std::move(pending));
        target->row_lines.push_back(pending_line ? pending_line : line);
        pending.clear();
        pending_line = 0;
    };

    auto consume_matrix_text = [&](std::string_view body, std::size_t line) -> bool {
        // returns true when the closing bracket was seen
        std::size_t i = 0;
        while (i < body.size()) {
            char ch = body[i];
            if (ch == ']') {
                flush_row(line);
                return true;
            }
            if (ch == ';') {
                flush_row(line);
                ++i;
                continue;
            }
            if (ch == ' ' || ch == '\t' || ch == ',' || ch == '\r') {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < body.size() && body[j] != ' ' && body[j] != '\t' && body[j] != ',' && body[j] != ';' &&
                   body[j] != ']' && body[j] != '\r')
                ++j;
            if (pending.empty()) pending_line = line;
            pending.push_back(detail::parse_number(body.substr(i, j - i), line));
            i = j;
        }
        // newline ends a row as well
        flush_row(line);
        return false;
    };

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        std::string_view ln = detail::trim(detail::strip_comment(raw));

        if (skipping) {
            if (ln.find(skip_close) != std::string_view::npos) skipping = false;
            continue;
        }
        if (!current.empty()) {
            if (consume_matrix_text(ln, line_no)) {
                current.clear();
                target = nullptr;
            }
            continue;
        }
        if (ln.empty()) continue;
        if (ln.rfind("function", 0) == 0) continue;

        auto eq = ln.find('=');
        if (ln.rfind("mpc.", 0) != 0 || eq == std::string_view::npos) {
            throw CaseError("syntax error: unrecognized statement '" + std::string(ln) + "'", line_no);
        }
        std::string name(detail::trim(ln.substr(4, eq - 4)));
        std::string_view rhs = detail::trim(ln.substr(eq + 1));

        if (name == "baseMVA") {
            if (rhs.empty() || rhs.back() != ';') throw CaseError("syntax error: missing ';' after baseMVA", line_no);
            base_mva = detail::parse_number(detail::trim(rhs.substr(0, rhs.size() - 1)), line_no);
            have_base = true;
            continue;
        }
        const bool wanted = (name == "bus" || name == "gen" || name == "branch");
        if (!rhs.empty() && (rhs.front() == '[' || rhs.front() == '{')) {
            char close = rhs.front() == '[' ? ']' : '}';
            if (!wanted || close == '}') {
                if (rhs.find(close) == std::string_view::npos) {
                    skipping = true;
                    skip_close = close;
                }
                continue;
            }
            if (matrices.count(name)) throw CaseError("duplicate definition of mpc." + name, line_no);
            current = name;
            target = &matrices[name];
            target->first_line = line_no;
            if (consume_matrix_text(rhs.substr(1), line_no)) {
                current.clear();
                target = nullptr;
            }
            continue;
        }
        if (wanted) throw CaseError("syntax error: expected '[' after mpc." + name, line_no);
        // scalar or string field we do not use (version, etc.)
    }
    if (!current.empty()) throw CaseError("syntax error: mpc." + current + " not terminated by '];'", line_no);

    if (!have_base) throw CaseError("missing mpc.baseMVA");
    if (!(base_mva > 0.0) || !std::isfinite(base_mva)) throw CaseError("non-positive baseMVA");
    for (const char* need : {"bus", "gen", "branch"}) {
        if (!matrices.count(need)) throw CaseError(std::string("missing mpc.") + need);
    }

    auto check_cols = [](const RawMatrix& m, std::size_t min_cols, const char* what) {
        for (std::size_t r = 0; r < m.rows.size(); ++r) {
            if (m.rows[r].size() < min_cols)
                throw CaseError(std::string("syntax error: ") + what + " row has " + std::to_string(m.rows[r].size()) +
                                    " columns, need at least " + std::to_string(min_cols),
                                m.row_lines[r]);
        }
    };
    const auto& bus_m = matrices["bus"];
    const auto& gen_m = matrices["gen"];
    const auto& br_m = matrices["branch"];
    check_cols(bus_m, 3, "bus");
    check_cols(gen_m, 10, "gen");
    check_cols(br_m, 11, "branch");

    Network net;
    net.base_mva = base_mva;
    for (std::size_t r = 0; r < bus_m.rows.size(); ++r) {
        const auto& row = bus_m.rows[r];
        Bus b;
        b.id = static_cast<int>(row[0]);
        if (b.id <= 0 || static_cast<double>(b.id) != row[0])
            throw CaseError("bus id must be a positive integer", bus_m.row_lines[r]);
        b.is_reference = static_cast<int>(row[1]) == 3;
        net.buses.push_back(b);
        if (row[2] > 0.0) {
            Load l;
            l.id = static_cast<int>(net.loads.size()) + 1;
            l.bus = b.id;
            l.d_max = row[2] / base_mva;
            net.loads.push_back(l);
        }
    }
    {
        std::vector<int> ids;
        for (const auto& b : net.buses) ids.push_back(b.id);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw CaseError("duplicate bus id");
    }

    for (std::size_t r = 0; r < gen_m.rows.size(); ++r) {
        const auto& row = gen_m.rows[r];
        Generator g;
        g.bus = static_cast<int>(row[0]);
        if (net.bus_index(g.bus) < 0)
            throw CaseError("dangling bus reference " + std::to_string(g.bus) + " in gen", gen_m.row_lines[r]);
        if (row.size() >= 8 && row[7] <= 0.0) continue;  // out of service
        g.id = static_cast<int>(net.generators.size()) + 1;
        g.p_max = row[8] / base_mva;
        g.p_min = row[9] / base_mva;
        net.generators.push_back(g);
    }

    for (std::size_t r = 0; r < br_m.rows.size(); ++r) {
        const auto& row = br_m.rows[r];
        const int f = static_cast<int>(row[0]);
        const int t = static_cast<int>(row[1]);
        if (net.bus_index(f) < 0 || net.bus_index(t) < 0)
            throw CaseError("dangling bus reference in branch " + std::to_string(f) + "-" + std::to_string(t),
                            br_m.row_lines[r]);
        if (row[10] == 0.0) continue;
        if (row[3] == 0.0) throw CaseError("zero reactance", br_m.row_lines[r]);
        Line l;
        l.id = static_cast<int>(net.lines.size()) + 1;
        l.from_bus = f;
        l.to_bus = t;
        l.reactance_x = row[3];
        l.susceptance_b = 1.0 / row[3];
        l.rating_pmax = row[5] == 0.0 ? std::numeric_limits<double>::infinity() : row[5] / base_mva;
        net.lines.push_back(l);
    }
    return net;
}

inline Network read_case_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CaseError("cannot open case file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

/// Lists every broken invariant; empty when the network is consistent.
inline std::vector<std::string> validate(const Network& net) {
    std::vector<std::string> out;
    if (!(net.base_mva > 0.0)) out.push_back("base_mva must be positive");
    {
        std::map<int, int> seen;
        for (const auto& b : net.buses)
            if (++seen[b.id] == 2) out.push_back("duplicate bus id " + std::to_string(b.id));
    }
    auto has_bus = [&](int id) {
        return std::any_of(net.buses.begin(), net.buses.end(), [id](const Bus& b) { return b.id == id; });
    };
    for (const auto& l : net.lines) {
        const std::string tag = "line " + std::to_string(l.id);
        if (l.reactance_x == 0.0) out.push_back(tag + ": zero reactance");
        if (!std::isfinite(l.susceptance_b)) out.push_back(tag + ": non-finite susceptance");
        if (!(l.rating_pmax > 0.0)) out.push_back(tag + ": rating must be positive");
        if (!has_bus(l.from_bus) || !has_bus(l.to_bus)) out.push_back(tag + ": dangling bus reference");
    }
    for (const auto& g : net.generators) {
        const std::string tag = "generator " + std::to_string(g.id);
        if (g.p_min > g.p_max) out.push_back(tag + ": p_min exceeds p_max");
        if (!has_bus(g.bus)) out.push_back(tag + ": dangling bus reference");
    }
    for (const auto& l : net.loads) {
        const std::string tag = "load " + std::to_string(l.id);
        if (!(l.d_max > 0.0)) out.push_back(tag + ": d_max must be positive");
        if (!(l.weight >= 0.0)) out.push_back(tag + ": negative weight");
        if (!has_bus(l.bus)) out.push_back(tag + ": dangling bus reference");
    }
    return out;
}

/// Reads a `load_id,weight` CSV. Loads not mentioned keep weight 1.
inline std::vector<double> parse_weights(std::string_view text, const Network& net) {
    std::vector<double> w(net.loads.size(), 1.0);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view ln = detail::trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (ln.empty()) continue;
        if (!header_seen) {
            if (ln != "load_id,weight") throw CaseError("weights file must start with header 'load_id,weight'", line_no);
            header_seen = true;
            continue;
        }
        auto comma = ln.find(',');
        if (comma == std::string_view::npos) throw CaseError("syntax error: expected 'load_id,weight'", line_no);
        const double id = detail::parse_number(detail::trim(ln.substr(0, comma)), line_no);
        const double val = detail::parse_number(detail::trim(ln.substr(comma + 1)), line_no);
        const auto idx = static_cast<long>(id);
        if (static_cast<double>(idx) != id || idx < 1 || idx > static_cast<long>(w.size()))
            throw CaseError("unknown load id " + std::string(detail::trim(ln.substr(0, comma))), line_no);
        if (!(val >= 0.0) || !std::isfinite(val)) throw CaseError("weight must be finite and nonnegative", line_no);
        w[static_cast<std::size_t>(idx - 1)] = val;
    }
    if (!header_seen) throw CaseError("empty weights file");
    return w;
}

inline std::vector<double> read_weights_file(const std::string& path, const Network& net) {
    std::ifstream in(path);
    if (!in) throw CaseError("cannot open weights file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_weights(ss.str(), net);
}

/// Copy of `net` with load weights replaced.
inline Network with_weights(Network net, const std::vector<double>& weights) {
    if (weights.size() != net.loads.size()) throw std::invalid_argument("weights/loads dimension mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) net.loads[i].weight = weights[i];
    return net;
}

}  // namespace fairshed

#endif  // FAIRSHED_CASEIO_HPP
