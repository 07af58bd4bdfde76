#ifndef VIRALSIM_SOCIALGRAPH_HPP
#define VIRALSIM_SOCIALGRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "viralsim/geometry.hpp"
#include "viralsim/rng.hpp"

namespace viralsim {

/// Parameters of the power-law expected-degree recipe w_i = c (i0 + i)^(-1/(beta-1)).
struct PowerLawParams {
	double beta = 3.5;
	double dbar = 0.0;
	double M = 0.0;
	double m = 0.0;   // smallest realized weight
	double c = 0.0;
	double i0 = 0.0;
};

class InadmissibleSequence : public std::invalid_argument {
public:
	InadmissibleSequence(std::size_t index, double weight, double vol)
	    : std::invalid_argument("inadmissible degree sequence: w[" + std::to_string(index) + "]^2 = " +
	                            std::to_string(weight * weight) + " exceeds vol = " + std::to_string(vol)),
	      index_(index) {}

	std::size_t index() const noexcept { return index_; }

private:
	std::size_t index_;
};

struct DegreeSequence {
	std::vector<double> weights;
	std::optional<PowerLawParams> params;

	std::size_t size() const noexcept { return weights.size(); }

	double vol() const noexcept { return std::accumulate(weights.begin(), weights.end(), 0.0); }

	/// Throws InadmissibleSequence naming the first index with w^2 > sum(w).
	void check_admissible() const {
		const double v = vol();
		for (std::size_t i = 0; i < weights.size(); ++i) {
			if (!(weights[i] > 0.0)) {
				throw std::invalid_argument("weights must be positive");
			}
			if (weights[i] * weights[i] > v) {
				throw InadmissibleSequence(i, weights[i], v);
			}
		}
	}
};

inline DegreeSequence powerlaw_weights(std::size_t n, double beta, double dbar, double M) {
	if (n == 0) {
		throw std::invalid_argument("powerlaw_weights: n must be positive");
	}
	if (!(beta > 2.0) || !(dbar > 0.0) || !(M > 0.0)) {
		throw std::invalid_argument("powerlaw_weights: need beta > 2, dbar > 0, M > 0");
	}
	const double nn = static_cast<double>(n);
	const double expo = 1.0 / (beta - 1.0);
	PowerLawParams pl;
	pl.beta = beta;
	pl.dbar = dbar;
	pl.M = M;
	pl.c = (beta - 2.0) / (beta - 1.0) * dbar * std::pow(nn, expo);
	pl.i0 = nn * std::pow(dbar * (beta - 2.0) / (M * (beta - 1.0)), beta - 1.0);

	DegreeSequence seq;
	seq.weights.resize(n);
	for (std::size_t i = 0; i < n; ++i) {
		seq.weights[i] = pl.c * std::pow(pl.i0 + static_cast<double>(i + 1), -expo);
	}
	pl.m = seq.weights.back();
	seq.params = pl;
	seq.check_admissible();
	return seq;
}

/// Power-law sequence whose smallest weight equals m, with M = m_scale * sqrt(n * dbar).
/// dbar is solved for by bisection (the smallest weight is increasing in dbar
/// at fixed M) and M is iterated to a fixed point.
inline DegreeSequence powerlaw_with_min_weight(std::size_t n, double beta, double m, double m_scale = 0.5) {
	if (!(m > 0.0) || !(m_scale > 0.0)) {
		throw std::invalid_argument("powerlaw_with_min_weight: need m > 0 and m_scale > 0");
	}
	const double nn = static_cast<double>(n);
	const double expo = 1.0 / (beta - 1.0);
	auto min_weight = [&](double dbar, double M) {
		const double c = (beta - 2.0) / (beta - 1.0) * dbar * std::pow(nn, expo);
		const double i0 = nn * std::pow(dbar * (beta - 2.0) / (M * (beta - 1.0)), beta - 1.0);
		return c * std::pow(i0 + nn, -expo);
	};
	double dbar = m * (beta - 1.0) / (beta - 2.0);
	double M = m_scale * std::sqrt(nn * dbar);
	for (int iter = 0; iter < 60; ++iter) {
		if (M <= m) {
			throw std::invalid_argument("powerlaw_with_min_weight: M would not exceed m; increase n or m_scale");
		}
		double lo = m;
		double hi = m;
		while (min_weight(hi, M) < m) {
			hi *= 2.0;
			if (hi > 1e12) {
				throw std::invalid_argument("powerlaw_with_min_weight: no dbar reaches the requested minimum");
			}
		}
		for (int b = 0; b < 200 && hi - lo > 1e-12 * hi; ++b) {
			const double mid = 0.5 * (lo + hi);
			(min_weight(mid, M) < m ? lo : hi) = mid;
		}
		dbar = hi;
		const double nextM = m_scale * std::sqrt(nn * dbar);
		if (std::abs(nextM - M) <= 1e-12 * M) {
			break;
		}
		M = nextM;
	}
	return powerlaw_weights(n, beta, dbar, M);
}

/// Undirected simple graph in compressed adjacency form; each neighbor list
/// is sorted ascending.
class SocialGraph {
public:
	SocialGraph() = default;

	SocialGraph(std::size_t n, std::vector<std::pair<NodeId, NodeId>> edges, DegreeSequence degseq, Seed seed)
	    : degseq_(std::move(degseq)), seed_(seed) {
		if (!degseq_.weights.empty() && degseq_.size() != n) {
			throw std::invalid_argument("degree sequence length does not match n");
		}
		offsets_.assign(n + 1, 0);
		for (auto [a, b] : edges) {
			if (a >= n || b >= n || a == b) {
				throw std::invalid_argument("edge endpoint out of range or self-loop");
			}
			++offsets_[a + 1];
			++offsets_[b + 1];
		}
		std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
		targets_.resize(offsets_.back());
		std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
		for (auto [a, b] : edges) {
			targets_[fill[a]++] = b;
			targets_[fill[b]++] = a;
		}
		for (std::size_t i = 0; i < n; ++i) {
			auto first = targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
			auto last = targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
			std::sort(first, last);
			if (std::adjacent_find(first, last) != last) {
				throw std::invalid_argument("duplicate edge");
			}
		}
	}

	std::size_t size() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
	std::size_t edge_count() const noexcept { return targets_.size() / 2; }
	Seed seed() const noexcept { return seed_; }
	const DegreeSequence& degseq() const noexcept { return degseq_; }

	std::span<const NodeId> neighbors(NodeId i) const {
		return {targets_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
	}
	std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }
	bool adjacent(NodeId i, NodeId j) const {
		auto nb = neighbors(i);
		return std::binary_search(nb.begin(), nb.end(), j);
	}
	double weight(NodeId i) const { return degseq_.weights.empty() ? 1.0 : degseq_.weights[i]; }

	/// Graph with unit weights from an explicit edge list (fixtures, tests).
	static SocialGraph from_edges(std::size_t n, std::vector<std::pair<NodeId, NodeId>> edges) {
		DegreeSequence unit;
		unit.weights.assign(n, 1.0);
		return SocialGraph(n, std::move(edges), std::move(unit), 0);
	}

private:
	std::vector<std::size_t> offsets_;
	std::vector<NodeId> targets_;
	DegreeSequence degseq_;
	Seed seed_ = 0;
};

/// Chung-Lu graph by geometric skipping over weights sorted non-increasing:
/// expected O(n + |E|) work, every pair {i,j} present independently with
/// probability min(1, w_i w_j / vol).
inline SocialGraph generate(const DegreeSequence& degseq, Seed seed) {
	degseq.check_admissible();
	const std::size_t n = degseq.size();
	std::vector<NodeId> order(n);
	std::iota(order.begin(), order.end(), NodeId{0});
	std::stable_sort(order.begin(), order.end(),
	                 [&](NodeId a, NodeId b) { return degseq.weights[a] > degseq.weights[b]; });
	std::vector<double> w(n);
	for (std::size_t k = 0; k < n; ++k) {
		w[k] = degseq.weights[order[k]];
	}
	const double vol = degseq.vol();

	Engine eng(seed);
	std::vector<std::pair<NodeId, NodeId>> edges;
	edges.reserve(static_cast<std::size_t>(vol / 2.0 * 1.05) + 16);
	for (std::size_t u = 0; u + 1 < n; ++u) {
		std::size_t v = u + 1;
		double p = std::min(1.0, w[u] * w[v] / vol);
		while (v < n && p > 0.0) {
			if (p < 1.0) {
				const double r = 1.0 - uniform01(eng);  // (0, 1]
				const double skip = std::floor(std::log(r) / std::log1p(-p));
				if (skip >= static_cast<double>(n - v)) {
					break;
				}
				v += static_cast<std::size_t>(skip);
			}
			const double q = std::min(1.0, w[u] * w[v] / vol);
			if (uniform01(eng) < q / p) {
				NodeId a = order[u];
				NodeId b = order[v];
				edges.emplace_back(std::min(a, b), std::max(a, b));
			}
			p = q;
			++v;
		}
	}
	return SocialGraph(n, std::move(edges), degseq, seed);
}

/// Reference generator: one Bernoulli trial per unordered pair. Theta(n^2);
/// kept for cross-checking the skip sampler on small n.
inline SocialGraph generate_all_pairs(const DegreeSequence& degseq, Seed seed) {
	degseq.check_admissible();
	const std::size_t n = degseq.size();
	const double vol = degseq.vol();
	Engine eng(seed);
	std::vector<std::pair<NodeId, NodeId>> edges;
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = i + 1; j < n; ++j) {
			const double p = std::min(1.0, degseq.weights[i] * degseq.weights[j] / vol);
			if (uniform01(eng) < p) {
				edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
			}
		}
	}
	return SocialGraph(n, std::move(edges), degseq, seed);
}

inline constexpr int kUnreached = -1;

/// Hop distance from root to every node, stopping after max_depth hops
/// (negative max_depth means unbounded). Unreached nodes get kUnreached.
inline std::vector<int> hop_distances(const SocialGraph& g, NodeId root, int max_depth = -1) {
	if (root >= g.size()) {
		throw std::out_of_range("hop_distances: root out of range");
	}
	std::vector<int> dist(g.size(), kUnreached);
	std::vector<NodeId> frontier{root};
	std::vector<NodeId> next;
	dist[root] = 0;
	for (int d = 1; !frontier.empty() && (max_depth < 0 || d <= max_depth); ++d) {
		next.clear();
		for (NodeId u : frontier) {
			for (NodeId v : g.neighbors(u)) {
				if (dist[v] == kUnreached) {
					dist[v] = d;
					next.push_back(v);
				}
			}
		}
		frontier.swap(next);
	}
	return dist;
}

/// Shells S_0 = {root}, S_1, ..., S_depth of nodes at exactly i hops. Each
/// shell is sorted; trailing empty shells are kept so the result has depth+1 entries.
inline std::vector<std::vector<NodeId>> bfs_neighborhood(const SocialGraph& g, NodeId root, int depth) {
	if (root >= g.size()) {
		throw std::out_of_range("bfs_neighborhood: root out of range");
	}
	if (depth < 0) {
		throw std::invalid_argument("bfs_neighborhood: negative depth");
	}
	std::vector<std::vector<NodeId>> shells(static_cast<std::size_t>(depth) + 1);
	std::vector<bool> seen(g.size(), false);
	shells[0] = {root};
	seen[root] = true;
	for (int d = 1; d <= depth; ++d) {
		auto& cur = shells[static_cast<std::size_t>(d)];
		for (NodeId u : shells[static_cast<std::size_t>(d) - 1]) {
			for (NodeId v : g.neighbors(u)) {
				if (!seen[v]) {
					seen[v] = true;
					cur.push_back(v);
				}
			}
		}
		std::sort(cur.begin(), cur.end());
	}
	return shells;
}

/// Component label per node; labels are assigned in order of smallest member.
inline std::vector<std::uint32_t> component_labels(const SocialGraph& g) {
	constexpr auto kNone = ~std::uint32_t{0};
	std::vector<std::uint32_t> label(g.size(), kNone);
	std::vector<NodeId> stack;
	std::uint32_t next = 0;
	for (NodeId s = 0; s < g.size(); ++s) {
		if (label[s] != kNone) {
			continue;
		}
		label[s] = next;
		stack.assign(1, s);
		while (!stack.empty()) {
			NodeId u = stack.back();
			stack.pop_back();
			for (NodeId v : g.neighbors(u)) {
				if (label[v] == kNone) {
					label[v] = next;
					stack.push_back(v);
				}
			}
		}
		++next;
	}
	return label;
}

/// Largest connected component, sorted; ties go to the component holding
/// the smallest index.
inline std::vector<NodeId> giant_component(const SocialGraph& g) {
	if (g.size() == 0) {
		return {};
	}
	const auto label = component_labels(g);
	const std::uint32_t count = *std::max_element(label.begin(), label.end()) + 1;
	std::vector<std::size_t> sizes(count, 0);
	for (auto l : label) {
		++sizes[l];
	}
	const auto best = static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
	std::vector<NodeId> out;
	out.reserve(sizes[best]);
	for (NodeId i = 0; i < g.size(); ++i) {
		if (label[i] == best) {
			out.push_back(i);
		}
	}
	return out;
}

namespace detail {

struct Sweep {
	int eccentricity = 0;
	NodeId farthest = 0;
	std::size_t reached = 0;
};

inline Sweep bfs_sweep(const SocialGraph& g, NodeId root, std::vector<int>& dist, std::vector<NodeId>& queue) {
	std::fill(dist.begin(), dist.end(), kUnreached);
	queue.clear();
	queue.push_back(root);
	dist[root] = 0;
	Sweep s{0, root, 0};
	for (std::size_t head = 0; head < queue.size(); ++head) {
		NodeId u = queue[head];
		const int du = dist[u];
		if (du > s.eccentricity || (du == s.eccentricity && u < s.farthest)) {
			s.eccentricity = du;
			s.farthest = u;
		}
		for (NodeId v : g.neighbors(u)) {
			if (dist[v] == kUnreached) {
				dist[v] = du + 1;
				queue.push_back(v);
			}
		}
	}
	s.reached = queue.size();
	return s;
}

}  // namespace detail

/// Diameter estimate by repeated BFS double sweeps (at least `sweeps` BFS
/// runs). The result is the largest eccentricity observed, so it is never
/// below the eccentricity of any swept source.
inline int diameter_estimate(const SocialGraph& g, std::span<const NodeId> component, int sweeps = 16) {
	if (component.empty()) {
		throw std::invalid_argument("diameter_estimate: empty component");
	}
	std::vector<int> dist(g.size(), kUnreached);
	std::vector<NodeId> queue;
	queue.reserve(g.size());
	std::vector<bool> swept(g.size(), false);

	NodeId source = component.front();
	auto first = detail::bfs_sweep(g, source, dist, queue);
	if (first.reached != component.size()) {
		throw std::invalid_argument("diameter_estimate: component is not a connected component");
	}
	for (NodeId v : component) {
		if (dist[v] == kUnreached) {
			throw std::invalid_argument("diameter_estimate: component is not connected");
		}
	}
	swept[source] = true;
	int best = first.eccentricity;
	NodeId next = first.farthest;
	CounterStream restart(mix_seed({g.seed(), component.size(), 0xd1a3e7e5ULL}));
	for (int k = 1; k < sweeps; ++k) {
		if (swept[next]) {
			next = component[uniform_below(restart, component.size())];
		}
		swept[next] = true;
		auto s = detail::bfs_sweep(g, next, dist, queue);
		best = std::max(best, s.eccentricity);
		next = s.farthest;
	}
	return best;
}

/// vol of each BFS shell around root, computed from expected weights.
inline std::vector<double> neighborhood_growth_profile(const SocialGraph& g, NodeId root, int depth) {
	auto shells = bfs_neighborhood(g, root, depth);
	std::vector<double> vols;
	vols.reserve(shells.size());
	for (const auto& shell : shells) {
		double v = 0.0;
		for (NodeId u : shell) {
			v += g.weight(u);
		}
		vols.push_back(v);
	}
	return vols;
}

struct GraphStats {
	double vol = 0.0;
	double vol2 = 0.0;
	double vol3 = 0.0;
	double dtilde = 0.0;
	std::size_t giant_size = 0;
	int diameter_est = 0;
};

inline GraphStats stats(const SocialGraph& g) {
	GraphStats s;
	for (NodeId i = 0; i < g.size(); ++i) {
		const double w = g.weight(i);
		s.vol += w;
		s.vol2 += w * w;
		s.vol3 += w * w * w;
	}
	s.dtilde = s.vol > 0.0 ? s.vol2 / s.vol : 0.0;
	if (g.size() > 0) {
		auto giant = giant_component(g);
		s.giant_size = giant.size();
		s.diameter_est = diameter_estimate(g, giant);
	}
	return s;
}

// Edge list: "n,seed,beta,dbar,M,m" line then "i,j" per edge with i < j.
// Weights: "index,weight" per node.

inline void write_graph_csv(std::ostream& os, const SocialGraph& g) {
	const auto pl = g.degseq().params.value_or(PowerLawParams{0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
	os << std::setprecision(17);
	os << g.size() << ',' << g.seed() << ',' << pl.beta << ',' << pl.dbar << ',' << pl.M << ',' << pl.m << '\n';
	for (NodeId i = 0; i < g.size(); ++i) {
		for (NodeId j : g.neighbors(i)) {
			if (i < j) {
				os << i << ',' << j << '\n';
			}
		}
	}
}

inline void write_weights_csv(std::ostream& os, const SocialGraph& g) {
	os << std::setprecision(17);
	for (NodeId i = 0; i < g.size(); ++i) {
		os << i << ',' << g.weight(i) << '\n';
	}
}

inline SocialGraph read_graph_csv(std::istream& edges_in, std::istream& weights_in) {
	std::string line;
	if (!std::getline(edges_in, line)) {
		throw std::runtime_error("graph csv: missing header");
	}
	std::replace(line.begin(), line.end(), ',', ' ');
	std::istringstream hs(line);
	std::size_t n = 0;
	Seed seed = 0;
	PowerLawParams pl;
	if (!(hs >> n >> seed >> pl.beta >> pl.dbar >> pl.M >> pl.m)) {
		throw std::runtime_error("graph csv: malformed header");
	}
	std::vector<std::pair<NodeId, NodeId>> edges;
	while (std::getline(edges_in, line)) {
		if (line.empty()) {
			continue;
		}
		std::replace(line.begin(), line.end(), ',', ' ');
		std::istringstream ls(line);
		NodeId a = 0;
		NodeId b = 0;
		if (!(ls >> a >> b) || a >= b) {
			throw std::runtime_error("graph csv: malformed edge '" + line + "'");
		}
		edges.emplace_back(a, b);
	}
	DegreeSequence seq;
	seq.weights.assign(n, 0.0);
	for (std::size_t k = 0; k < n; ++k) {
		if (!std::getline(weights_in, line)) {
			throw std::runtime_error("weights csv: truncated");
		}
		std::replace(line.begin(), line.end(), ',', ' ');
		std::istringstream ls(line);
		std::size_t idx = 0;
		double w = 0.0;
		if (!(ls >> idx >> w) || idx >= n) {
			throw std::runtime_error("weights csv: malformed row");
		}
		seq.weights[idx] = w;
	}
	if (pl.beta > 0.0) {
		seq.params = pl;
	}
	return SocialGraph(n, std::move(edges), std::move(seq), seed);
}

}  // namespace viralsim

#endif  // VIRALSIM_SOCIALGRAPH_HPP
