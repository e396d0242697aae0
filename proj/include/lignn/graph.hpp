#pragma once

#include <lignn/error.hpp>
#include <lignn/rng.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lignn {

using VertexId = std::uint32_t;

struct Edge {
    VertexId src;
    VertexId dst;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Destination-grouped CSR: neighbors(v) lists the sources feeding v, in input order.
class Graph {
public:
    Graph() : offsets_{0} {}

    Graph(std::uint64_t num_vertices, std::vector<std::uint64_t> offsets,
          std::vector<VertexId> neighbors)
        : num_vertices_(num_vertices), offsets_(std::move(offsets)), neighbors_(std::move(neighbors)) {
        validate();
    }

    /// Stable group-by-destination; duplicate edges are kept.
    static Graph from_edges(std::uint64_t num_vertices, std::span<const Edge> edges) {
        std::vector<std::uint64_t> offsets(num_vertices + 1, 0);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const auto& e = edges[i];
            if (e.src >= num_vertices || e.dst >= num_vertices) {
                throw BoundsError("edge " + std::to_string(i) + " (" + std::to_string(e.src) + ", " +
                                  std::to_string(e.dst) + ") out of range for " +
                                  std::to_string(num_vertices) + " vertices");
            }
            ++offsets[e.dst + 1];
        }
        for (std::uint64_t v = 0; v < num_vertices; ++v) offsets[v + 1] += offsets[v];
        std::vector<VertexId> neighbors(edges.size());
        std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
        for (const auto& e : edges) neighbors[cursor[e.dst]++] = e.src;
        return Graph(num_vertices, std::move(offsets), std::move(neighbors));
    }

    std::uint64_t num_vertices() const noexcept { return num_vertices_; }
    std::uint64_t num_edges() const noexcept { return neighbors_.size(); }
    std::span<const std::uint64_t> offsets() const noexcept { return offsets_; }
    std::span<const VertexId> neighbors() const noexcept { return neighbors_; }

    std::span<const VertexId> neighbors(VertexId dst) const {
        return std::span<const VertexId>(neighbors_).subspan(offsets_[dst], offsets_[dst + 1] - offsets_[dst]);
    }

    std::uint64_t in_degree(VertexId dst) const { return offsets_[dst + 1] - offsets_[dst]; }

    /// Edges in traversal order (ascending destination, CSR order within).
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(neighbors_.size());
        for (std::uint64_t v = 0; v < num_vertices_; ++v) {
            for (auto u : neighbors(static_cast<VertexId>(v))) out.push_back({u, static_cast<VertexId>(v)});
        }
        return out;
    }

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    void validate() const {
        if (offsets_.size() != num_vertices_ + 1 || offsets_.front() != 0 || offsets_.back() != neighbors_.size()) {
            throw BoundsError("CSR offsets inconsistent with vertex/edge counts");
        }
        if (!std::is_sorted(offsets_.begin(), offsets_.end())) {
            throw BoundsError("CSR offsets are not monotonically non-decreasing");
        }
        for (auto u : neighbors_) {
            if (u >= num_vertices_) throw BoundsError("neighbor id " + std::to_string(u) + " out of range");
        }
    }

    std::uint64_t num_vertices_ = 0;
    std::vector<std::uint64_t> offsets_;
    std::vector<VertexId> neighbors_;
};

enum class EdgeFormat { text, binary };

namespace detail {

inline constexpr std::string_view vertices_header = "# vertices:";

inline void put_u64(std::ostream& os, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

template <typename T>
bool get_le(std::istream& is, T& out) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) return false;
    out = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) out |= static_cast<T>(b[i]) << (8 * i);
    return true;
}

inline Graph load_text(std::istream& is, std::optional<std::uint64_t> num_vertices) {
    std::vector<Edge> edges;
    std::uint64_t max_id = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.starts_with(vertices_header) && !num_vertices) {
            std::istringstream hs(line.substr(vertices_header.size()));
            std::uint64_t n = 0;
            if (!(hs >> n)) throw ParseError("bad vertex-count header", lineno);
            num_vertices = n;
            continue;
        }
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::int64_t src = -1, dst = -1;
        std::string rest;
        if (!(ls >> src >> dst) || (ls >> rest && rest[0] != '#') || src < 0 || dst < 0 ||
            src > UINT32_MAX || dst > UINT32_MAX) {
            throw ParseError("malformed edge record '" + line + "'", lineno);
        }
        edges.push_back({static_cast<VertexId>(src), static_cast<VertexId>(dst)});
        max_id = std::max<std::uint64_t>(max_id, std::max(src, dst));
    }
    const std::uint64_t n = num_vertices.value_or(edges.empty() ? 0 : max_id + 1);
    return Graph::from_edges(n, edges);
}

inline Graph load_binary(std::istream& is, std::optional<std::uint64_t> num_vertices) {
    std::uint64_t n = 0, m = 0;
    if (!get_le(is, n) || !get_le(is, m)) throw ParseError("truncated binary header", 0);
    if (num_vertices && *num_vertices != n) {
        throw BoundsError("declared vertex count " + std::to_string(*num_vertices) +
                          " does not match file header " + std::to_string(n));
    }
    std::vector<Edge> edges;
    edges.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) {
        Edge e{};
        if (!get_le(is, e.src) || !get_le(is, e.dst)) throw ParseError("truncated edge record", 16 + 8 * i);
        edges.push_back(e);
    }
    return Graph::from_edges(n, edges);
}

}  // namespace detail

/// Parses an edge list. Text records are "src dst" per line with '#' comments; a
/// "# vertices: N" line declares |V|, otherwise it is the caller's value or max id + 1.
/// Binary is little-endian: u64 |V|, u64 |E|, then |E| u32 (src, dst) pairs.
inline Graph load_edge_list(std::istream& is, EdgeFormat format,
                            std::optional<std::uint64_t> num_vertices = std::nullopt) {
    return format == EdgeFormat::text ? detail::load_text(is, num_vertices)
                                      : detail::load_binary(is, num_vertices);
}

/// Writes edges in traversal order, so reloading reproduces the same CSR.
inline void write_edge_list(std::ostream& os, const Graph& g, EdgeFormat format) {
    const auto edges = g.edges();
    if (format == EdgeFormat::text) {
        os << detail::vertices_header << ' ' << g.num_vertices() << '\n';
        for (const auto& e : edges) os << e.src << ' ' << e.dst << '\n';
        return;
    }
    detail::put_u64(os, g.num_vertices());
    detail::put_u64(os, edges.size());
    for (const auto& e : edges) {
        detail::put_u32(os, e.src);
        detail::put_u32(os, e.dst);
    }
}

enum class SynthKind { uniform, rmat };

struct SynthParams {
    SynthKind kind = SynthKind::rmat;
    std::uint64_t num_vertices = 1u << 14;
    std::uint64_t num_edges = 1u << 17;
    double a = 0.57, b = 0.19, c = 0.19;
    std::uint64_t seed = 7;
};

namespace detail {

// Maps a 64-bit hash to [0, n) without the modulo's low-bit dependence.
inline std::uint64_t scale_to(std::uint64_t h, std::uint64_t n) {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(h) * n) >> 64);
}

}  // namespace detail

/// Deterministic synthetic graph with exactly num_edges edges (self loops and
/// duplicates allowed). R-MAT draws quadrant bits independently per level and
/// rejects endpoints beyond num_vertices when it is not a power of two.
inline Graph synth_graph(const SynthParams& p) {
    if (p.num_vertices == 0) throw ConfigError("synth_graph needs at least one vertex");
    if (p.num_vertices > (1ull << 32)) throw ConfigError("vertex ids are 32-bit");
    std::vector<Edge> edges;
    edges.reserve(p.num_edges);
    if (p.kind == SynthKind::uniform) {
        for (std::uint64_t i = 0; i < p.num_edges; ++i) {
            auto src = detail::scale_to(counter_hash(p.seed, 2 * i, 0), p.num_vertices);
            auto dst = detail::scale_to(counter_hash(p.seed, 2 * i + 1, 0), p.num_vertices);
            edges.push_back({static_cast<VertexId>(src), static_cast<VertexId>(dst)});
        }
        return Graph::from_edges(p.num_vertices, edges);
    }

    if (p.a < 0 || p.b < 0 || p.c < 0 || p.a + p.b + p.c > 1.0) {
        throw ConfigError("R-MAT probabilities must be non-negative and sum to at most 1");
    }
    const int scale = std::bit_width(std::bit_ceil(p.num_vertices)) - 1;
    const double ab = p.a + p.b, abc = p.a + p.b + p.c;
    std::uint64_t draw = 0;
    while (edges.size() < p.num_edges) {
        std::uint64_t src = 0, dst = 0;
        for (int level = 0; level < scale; ++level) {
            const double r = counter_uniform(p.seed, draw, static_cast<std::uint64_t>(level));
            src <<= 1;
            dst <<= 1;
            if (r < p.a) {
            } else if (r < ab) {
                dst |= 1;
            } else if (r < abc) {
                src |= 1;
            } else {
                src |= 1;
                dst |= 1;
            }
        }
        ++draw;
        if (src < p.num_vertices && dst < p.num_vertices) {
            edges.push_back({static_cast<VertexId>(src), static_cast<VertexId>(dst)});
        }
    }
    return Graph::from_edges(p.num_vertices, edges);
}

/// Source ids in traversal order: ascending destination, CSR order within.
inline std::span<const VertexId> access_sequence(const Graph& g) { return g.neighbors(); }

struct GraphStats {
    std::uint64_t num_vertices = 0;
    std::uint64_t num_edges = 0;
    double density = 0.0;
    std::optional<double> xi_arith;
    std::optional<double> xi_geom;
};

/// Density |E|/|V|^2 and neighbor-access irregularity along the traversal:
/// arithmetic mean of |consecutive index difference| and geometric mean over the
/// strictly positive differences.
inline GraphStats stats(const Graph& g) {
    GraphStats s;
    s.num_vertices = g.num_vertices();
    s.num_edges = g.num_edges();
    if (s.num_vertices > 0) {
        const auto nv = static_cast<long double>(s.num_vertices);
        s.density = static_cast<double>(static_cast<long double>(s.num_edges) / (nv * nv));
    }
    const auto seq = access_sequence(g);
    if (seq.size() < 2) return s;
    long double sum = 0, log_sum = 0;
    std::uint64_t positive = 0;
    for (std::size_t i = 1; i < seq.size(); ++i) {
        const auto diff = seq[i] > seq[i - 1] ? seq[i] - seq[i - 1] : seq[i - 1] - seq[i];
        sum += diff;
        if (diff > 0) {
            log_sum += std::log(static_cast<long double>(diff));
            ++positive;
        }
    }
    s.xi_arith = static_cast<double>(sum / (seq.size() - 1));
    if (positive > 0) s.xi_geom = static_cast<double>(std::exp(log_sum / positive));
    return s;
}

}  // namespace lignn
