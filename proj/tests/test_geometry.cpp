#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "viralsim/geometry.hpp"
#include "viralsim/rng.hpp"

using namespace viralsim;

TEST(PlaceUniform, SingleNodeInUnitSquare) {
	auto p = place_uniform(1, 99);
	EXPECT_DOUBLE_EQ(p.side(), 1.0);
	EXPECT_GE(p[0].x, 0.0);
	EXPECT_LE(p[0].x, 1.0);
	EXPECT_GE(p[0].y, 0.0);
	EXPECT_LE(p[0].y, 1.0);
}

TEST(PlaceUniform, RejectsZero) { EXPECT_THROW(place_uniform(0, 1), std::invalid_argument); }

TEST(PlaceUniform, SameSeedSameCoordinates) {
	auto a = place_uniform(10000, 42);
	auto b = place_uniform(10000, 42);
	ASSERT_EQ(a.size(), b.size());
	for (std::size_t i = 0; i < a.size(); ++i) {
		ASSERT_EQ(a[i].x, b[i].x);
		ASSERT_EQ(a[i].y, b[i].y);
	}
	auto c = place_uniform(10000, 43);
	EXPECT_NE(a[0].x, c[0].x);
}

TEST(PlaceUniform, SideSquaredIsN) {
	for (std::size_t n : {1u, 2u, 7u, 100u, 1000u, 10000u}) {
		auto p = place_uniform(n, n);
		EXPECT_NEAR(p.side() * p.side(), static_cast<double>(n), 1e-9 * n);
		for (const auto& q : p.coords()) {
			ASSERT_GE(q.x, 0.0);
			ASSERT_LE(q.x, p.side());
			ASSERT_GE(q.y, 0.0);
			ASSERT_LE(q.y, p.side());
		}
	}
}

TEST(PlaceUniform, MeanXWithinThreeStandardErrors) {
	const std::size_t n = 10000;
	const int reps = 200;
	double sum = 0.0;
	for (int s = 0; s < reps; ++s) {
		auto p = place_uniform(n, mix_seed({7, static_cast<std::uint64_t>(s)}));
		for (const auto& q : p.coords()) {
			sum += q.x;
		}
	}
	const double side = std::sqrt(static_cast<double>(n));
	const double mean = sum / (static_cast<double>(n) * reps);
	const double se = side / std::sqrt(12.0 * n * reps);
	EXPECT_LE(std::abs(mean - side / 2.0), 3.0 * se);
}

TEST(Placement, RejectsOutOfSquare) {
	EXPECT_THROW(Placement({{0.0, 0.0}, {2.0, 0.0}}, 0), std::invalid_argument);
	EXPECT_NO_THROW(Placement({{0.0, 0.0}, {std::sqrt(2.0), 0.0}}, 0));
}

TEST(Distance, Basics) {
	Placement p({{0.0, 0.0}, {0.0, 0.0}, {0.5, 0.5}, {0.5, 1.5}}, 0);
	EXPECT_EQ(distance(p, 0, 1), 0.0);
	EXPECT_DOUBLE_EQ(euclidean({0, 0}, {3, 4}), 5.0);
	EXPECT_DOUBLE_EQ(distance(p, 2, 3), 1.0);
	EXPECT_THROW(distance(p, 0, 4), std::out_of_range);
}

TEST(Distance, ThreeFourFive) {
	// 25 nodes so the square has side 5 and (3,4) fits.
	std::vector<Point> pts(25, Point{0.0, 0.0});
	pts[1] = {3.0, 4.0};
	Placement p(pts, 0);
	EXPECT_DOUBLE_EQ(distance(p, 0, 1), 5.0);
}

TEST(Distance, SymmetryAndTriangleInequality) {
	auto p = place_uniform(500, 3);
	CounterStream r(11);
	for (int t = 0; t < 100; ++t) {
		const auto i = static_cast<NodeId>(uniform_below(r, 500));
		const auto j = static_cast<NodeId>(uniform_below(r, 500));
		const auto k = static_cast<NodeId>(uniform_below(r, 500));
		EXPECT_EQ(distance(p, i, j), distance(p, j, i));
		EXPECT_GE(distance(p, i, j), 0.0);
		EXPECT_LE(distance(p, i, k), distance(p, i, j) + distance(p, j, k) + 1e-12);
	}
}

TEST(CountInRectangle, FullSquareAndOutside) {
	auto p = place_uniform(1000, 5);
	EXPECT_EQ(count_in_rectangle(p, {0, 0, p.side(), p.side()}), 1000u);
	EXPECT_EQ(count_in_rectangle(p, {p.side() + 1, p.side() + 1, p.side() + 2, p.side() + 2}), 0u);
}

TEST(CountInRectangle, ClosedBoundaries) {
	Placement p({{1.0, 1.0}, {0.0, 0.0}, {1.5, 1.5}, {1.0, 2.0}}, 0);
	EXPECT_EQ(count_in_rectangle(p, {1.0, 1.0, 1.5, 1.5}), 2u);
	// Zero-area segment still catches points lying on it.
	EXPECT_EQ(count_in_rectangle(p, {1.0, 1.0, 1.0, 2.0}), 2u);
}

TEST(CountInRectangle, PartitionSumsToN) {
	auto p = place_uniform(2000, 8);
	// Half-open strips to keep the partition disjoint under closed counting:
	// shrink each strip's upper edge by one ulp except the last.
	const int k = 7;
	std::size_t total = 0;
	for (int a = 0; a < k; ++a) {
		for (int b = 0; b < k; ++b) {
			const double x0 = p.side() * a / k;
			const double y0 = p.side() * b / k;
			double x1 = p.side() * (a + 1) / k;
			double y1 = p.side() * (b + 1) / k;
			if (a + 1 < k) x1 = std::nextafter(x1, 0.0);
			if (b + 1 < k) y1 = std::nextafter(y1, 0.0);
			total += count_in_rectangle(p, {x0, y0, x1, y1});
		}
	}
	EXPECT_EQ(total, 2000u);
}

TEST(CountInRectangle, AreaTwentyLogNRarelyDoubles) {
	const std::size_t n = 4096;
	const double area = 20.0 * std::log(static_cast<double>(n));
	const double s = std::sqrt(area);
	int hits = 0;
	const int trials = 500;
	for (int t = 0; t < trials; ++t) {
		auto p = place_uniform(n, mix_seed({21, static_cast<std::uint64_t>(t)}));
		if (static_cast<double>(count_in_rectangle(p, {10.0, 10.0, 10.0 + s, 10.0 + s})) >= 2.0 * area) {
			++hits;
		}
	}
	EXPECT_LE(static_cast<double>(hits) / trials, 0.01);
}

TEST(NearestWithin, Trivial) {
	Placement p({{0.0, 0.0}, {1.0, 1.0}, {1.5, 0.5}, {0.2, 0.0}}, 0);
	const std::vector<NodeId> one{1};
	EXPECT_EQ(nearest_within(p, 0, one, std::numeric_limits<double>::infinity()), NodeId{1});
	const std::vector<NodeId> far{1, 2};
	EXPECT_FALSE(nearest_within(p, 0, far, 1.0));
	EXPECT_FALSE(nearest_within(p, 0, {}, 10.0));
	const std::vector<NodeId> all{1, 2, 3};
	EXPECT_EQ(nearest_within(p, 0, all, 10.0), NodeId{3});
}

TEST(NearestWithin, TiesGoToSmallestIndex) {
	Placement p({{1.0, 1.0}, {1.5, 1.0}, {0.5, 1.0}, {1.0, 1.5}}, 0);
	const std::vector<NodeId> cands{3, 1, 2};
	EXPECT_EQ(nearest_within(p, 0, cands, 1.0), NodeId{1});
}

TEST(NearestWithin, MatchesBruteForce) {
	auto p = place_uniform(300, 17);
	std::vector<NodeId> cands(299);
	std::iota(cands.begin(), cands.end(), NodeId{1});
	for (double radius : {0.5, 1.0, 3.0, 100.0}) {
		std::optional<NodeId> want;
		double best = std::numeric_limits<double>::infinity();
		for (NodeId c : cands) {
			const double d = distance(p, 0, c);
			if (d <= radius && d < best) {
				best = d;
				want = c;
			}
		}
		EXPECT_EQ(nearest_within(p, 0, cands, radius), want);
	}
}

TEST(NearestWithin, MinDistanceGate) {
	const std::size_t n = 4096;
	const std::size_t k = 256;
	const double radius = std::sqrt(64.0 * n * std::log(static_cast<double>(n)) / (std::numbers::pi * k));
	std::vector<NodeId> cands(k);
	std::iota(cands.begin(), cands.end(), NodeId{1});
	int empty = 0;
	const int trials = 500;
	for (int t = 0; t < trials; ++t) {
		auto p = place_uniform(n, mix_seed({31, static_cast<std::uint64_t>(t)}));
		empty += nearest_within(p, 0, cands, radius) ? 0 : 1;
	}
	EXPECT_LE(static_cast<double>(empty) / trials, 0.01);
}

TEST(PlacementCsv, RoundTripIsExact) {
	auto p = place_uniform(257, 1234);
	std::stringstream ss;
	write_placement_csv(ss, p);
	std::string first;
	std::getline(ss, first);
	// Header carries the values n,side,seed.
	EXPECT_EQ(first.substr(0, 4), "257,");
	EXPECT_EQ(first.substr(first.rfind(',') + 1), "1234");
	ss.seekg(0);
	auto q = read_placement_csv(ss);
	ASSERT_EQ(q.size(), p.size());
	EXPECT_EQ(q.seed(), p.seed());
	for (std::size_t i = 0; i < p.size(); ++i) {
		ASSERT_EQ(q[i].x, p[i].x);
		ASSERT_EQ(q[i].y, p[i].y);
	}
}
