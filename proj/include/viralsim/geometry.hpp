#ifndef VIRALSIM_GEOMETRY_HPP
#define VIRALSIM_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viralsim/rng.hpp"

namespace viralsim {

using NodeId = std::uint32_t;

struct Point {
	double x = 0.0;
	double y = 0.0;
};

inline double euclidean(Point a, Point b) noexcept {
	return std::hypot(a.x - b.x, a.y - b.y);
}

/// Axis-aligned rectangle with closed boundaries.
struct Rect {
	double x0 = 0.0;
	double y0 = 0.0;
	double x1 = 0.0;
	double y1 = 0.0;

	double area() const noexcept { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
	bool contains(Point p) const noexcept { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

/// n static nodes on the sqrt(n) x sqrt(n) square (unit expected density).
/// Immutable once built.
class Placement {
public:
	Placement(std::vector<Point> coords, Seed seed) : coords_(std::move(coords)), seed_(seed) {
		if (coords_.empty()) {
			throw std::invalid_argument("placement needs at least one node");
		}
		side_ = std::sqrt(static_cast<double>(coords_.size()));
		for (const auto& p : coords_) {
			if (!(p.x >= 0.0 && p.x <= side_ && p.y >= 0.0 && p.y <= side_)) {
				throw std::invalid_argument("coordinate outside the square");
			}
		}
	}

	std::size_t size() const noexcept { return coords_.size(); }
	double side() const noexcept { return side_; }
	Seed seed() const noexcept { return seed_; }
	std::span<const Point> coords() const noexcept { return coords_; }

	Point at(NodeId i) const {
		if (i >= coords_.size()) {
			throw std::out_of_range("node index out of range");
		}
		return coords_[i];
	}
	Point operator[](NodeId i) const noexcept { return coords_[i]; }

private:
	std::vector<Point> coords_;
	double side_ = 0.0;
	Seed seed_ = 0;
};

inline Placement place_uniform(std::size_t n, Seed seed) {
	if (n == 0) {
		throw std::invalid_argument("place_uniform: n must be positive");
	}
	const double side = std::sqrt(static_cast<double>(n));
	Engine eng(seed);
	std::vector<Point> coords(n);
	for (auto& p : coords) {
		p.x = uniform01(eng) * side;
		p.y = uniform01(eng) * side;
	}
	return Placement(std::move(coords), seed);
}

inline double distance(const Placement& p, NodeId i, NodeId j) {
	return euclidean(p.at(i), p.at(j));
}

inline std::size_t count_in_rectangle(const Placement& p, const Rect& r) {
	std::size_t count = 0;
	for (const auto& pt : p.coords()) {
		count += r.contains(pt) ? 1 : 0;
	}
	return count;
}

/// Closest candidate to node i if it lies within radius; ties go to the
/// smaller index. Node i itself is ignored if present.
inline std::optional<NodeId> nearest_within(const Placement& p, NodeId i, std::span<const NodeId> candidates,
                                            double radius) {
	const Point origin = p.at(i);
	std::optional<NodeId> best;
	double best_d = std::numeric_limits<double>::infinity();
	for (NodeId c : candidates) {
		if (c == i) {
			continue;
		}
		const double d = euclidean(origin, p.at(c));
		if (d < best_d || (d == best_d && best && c < *best)) {
			best_d = d;
			best = c;
		}
	}
	if (best && best_d <= radius) {
		return best;
	}
	return std::nullopt;
}

// Flat text format: "n,side,seed" line, then "index,x,y" per node, 17
// significant digits so a round trip is exact.

inline void write_placement_csv(std::ostream& os, const Placement& p) {
	os << std::setprecision(17);
	os << p.size() << ',' << p.side() << ',' << p.seed() << '\n';
	for (std::size_t i = 0; i < p.size(); ++i) {
		os << i << ',' << p[static_cast<NodeId>(i)].x << ',' << p[static_cast<NodeId>(i)].y << '\n';
	}
}

inline Placement read_placement_csv(std::istream& is) {
	std::string line;
	if (!std::getline(is, line)) {
		throw std::runtime_error("placement csv: missing header");
	}
	std::size_t n = 0;
	double side = 0.0;
	Seed seed = 0;
	{
		std::istringstream hs(line);
		char c1 = 0;
		char c2 = 0;
		if (!(hs >> n >> c1 >> side >> c2 >> seed) || c1 != ',' || c2 != ',') {
			throw std::runtime_error("placement csv: malformed header");
		}
	}
	std::vector<Point> coords(n);
	std::vector<bool> seen(n, false);
	for (std::size_t k = 0; k < n; ++k) {
		if (!std::getline(is, line)) {
			throw std::runtime_error("placement csv: truncated");
		}
		std::istringstream ls(line);
		std::size_t idx = 0;
		char c1 = 0;
		char c2 = 0;
		Point pt;
		if (!(ls >> idx >> c1 >> pt.x >> c2 >> pt.y) || c1 != ',' || c2 != ',' || idx >= n || seen[idx]) {
			throw std::runtime_error("placement csv: malformed row " + std::to_string(k));
		}
		seen[idx] = true;
		coords[idx] = pt;
	}
	return Placement(std::move(coords), seed);
}

}  // namespace viralsim

#endif  // VIRALSIM_GEOMETRY_HPP
