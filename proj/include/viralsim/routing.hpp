#ifndef VIRALSIM_ROUTING_HPP
#define VIRALSIM_ROUTING_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "viralsim/channel.hpp"
#include "viralsim/geometry.hpp"

namespace viralsim {

enum class FlowKind : std::uint8_t { L, S };

inline const char* to_string(FlowKind k) noexcept { return k == FlowKind::L ? "L" : "S"; }

struct Cell {
	std::uint32_t row = 0;
	std::uint32_t col = 0;
	friend bool operator==(Cell, Cell) = default;
};

/// A flow routed along a staircase: along tx's row to rx's column, then
/// along that column to rx's row.
struct FlowPlan {
	std::uint64_t flow_id = 0;
	NodeId tx = 0;
	NodeId rx = 0;
	Cell from;
	Cell to;
	double rate = 0.0;  // bits/slot before the round-robin share
	FlowKind kind = FlowKind::L;

	std::size_t route_length() const noexcept {
		const auto dc = from.col > to.col ? from.col - to.col : to.col - from.col;
		const auto dr = from.row > to.row ? from.row - to.row : to.row - from.row;
		return dc + dr + 1;
	}

	std::vector<Cell> route() const {
		std::vector<Cell> cells;
		cells.reserve(route_length());
		const int step_c = to.col >= from.col ? 1 : -1;
		for (auto c = static_cast<int>(from.col);; c += step_c) {
			cells.push_back({from.row, static_cast<std::uint32_t>(c)});
			if (c == static_cast<int>(to.col)) {
				break;
			}
		}
		const int step_r = to.row >= from.row ? 1 : -1;
		for (auto r = static_cast<int>(from.row); r != static_cast<int>(to.row);) {
			r += step_r;
			cells.push_back({static_cast<std::uint32_t>(r), to.col});
		}
		return cells;
	}
};

struct RoutingParams {
	double kappa = 1.0;         // per-hop highway rate, bits/slot
	double cell_side = 4.0;
	double stripe_height = 0.0; // 0 means "same as cell_side"

	double stripe() const noexcept { return stripe_height > 0.0 ? stripe_height : cell_side; }
};

/// Idealized highway system over a lattice of square cells. Each cell counts
/// the flows routed through it; a flow's rate is kappa divided by the
/// largest count on its route (equal sharing at the bottleneck relay).
class HighwayGrid {
public:
	HighwayGrid(const Placement& placement, const RoutingParams& params)
	    : placement_(&placement), params_(params) {
		if (!(params.cell_side >= 1.0)) {
			throw std::invalid_argument("build_grid: cell_side must be at least 1");
		}
		if (!(params.kappa > 0.0)) {
			throw std::invalid_argument("build_grid: kappa must be positive");
		}
		dim_ = static_cast<std::uint32_t>(std::ceil(placement.side() / params.cell_side - 1e-12));
		dim_ = std::max<std::uint32_t>(dim_, 1);
		load_.assign(static_cast<std::size_t>(dim_) * dim_, 0);
		peak_.assign(load_.size(), 0);
		levels_ = static_cast<std::uint32_t>(std::bit_width(dim_));
		row_table_.assign(static_cast<std::size_t>(levels_) * load_.size(), 0);
		col_table_.assign(row_table_.size(), 0);
	}

	std::uint32_t rows() const noexcept { return dim_; }
	std::uint32_t cols() const noexcept { return dim_; }
	double kappa() const noexcept { return params_.kappa; }
	const RoutingParams& params() const noexcept { return params_; }
	const Placement& placement() const noexcept { return *placement_; }

	Cell cell_of(NodeId node) const {
		const Point p = placement_->at(node);
		auto clampi = [&](double v) {
			auto k = static_cast<std::uint32_t>(std::max(0.0, std::floor(v / params_.cell_side)));
			return std::min(k, dim_ - 1);
		};
		return {clampi(p.y), clampi(p.x)};
	}

	std::uint32_t flow_count(Cell c) const { return load_.at(index(c)); }
	std::uint32_t peak_count(Cell c) const { return peak_.at(index(c)); }
	std::uint32_t max_load() const noexcept { return load_.empty() ? 0 : *std::max_element(load_.begin(), load_.end()); }
	std::uint32_t max_peak() const noexcept { return peak_.empty() ? 0 : *std::max_element(peak_.begin(), peak_.end()); }
	std::span<const std::uint32_t> loads() const noexcept { return load_; }
	std::span<const std::uint32_t> peaks() const noexcept { return peak_; }

	FlowPlan register_flow(NodeId tx, NodeId rx, FlowKind kind) {
		if (tx == rx) {
			throw std::invalid_argument("register_flow: tx == rx");
		}
		FlowPlan f;
		f.flow_id = next_id_++;
		f.tx = tx;
		f.rx = rx;
		f.from = cell_of(tx);
		f.to = cell_of(rx);
		f.kind = kind;
		apply(f, +1);
		return f;
	}

	void deregister_flow(const FlowPlan& f) { apply(f, -1); }

	/// Bottleneck count on the flow's route.
	std::uint32_t route_max(const FlowPlan& f) {
		refresh();
		const auto [c0, c1] = std::minmax(f.from.col, f.to.col);
		const auto [r0, r1] = std::minmax(f.from.row, f.to.row);
		return std::max(range_max(row_table_, f.from.row, c0, c1), range_max(col_table_, f.to.col, r0, r1));
	}

	/// rate = kappa / bottleneck count, for every flow.
	void assign_rates(std::span<FlowPlan> flows) {
		for (auto& f : flows) {
			const auto m = route_max(f);
			f.rate = params_.kappa / static_cast<double>(std::max<std::uint32_t>(m, 1));
		}
	}

	void write_heatmap_csv(std::ostream& os, bool peaks = false) const {
		os << "row,col,flow_count\n";
		const auto& src = peaks ? peak_ : load_;
		for (std::uint32_t r = 0; r < dim_; ++r) {
			for (std::uint32_t c = 0; c < dim_; ++c) {
				os << r << ',' << c << ',' << src[static_cast<std::size_t>(r) * dim_ + c] << '\n';
			}
		}
	}

private:
	std::size_t index(Cell c) const noexcept { return static_cast<std::size_t>(c.row) * dim_ + c.col; }

	void apply(const FlowPlan& f, int delta) {
		const auto [c0, c1] = std::minmax(f.from.col, f.to.col);
		for (auto c = c0; c <= c1; ++c) {
			bump({f.from.row, c}, delta);
		}
		const auto [r0, r1] = std::minmax(f.from.row, f.to.row);
		for (auto r = r0; r <= r1; ++r) {
			if (r != f.from.row) {
				bump({r, f.to.col}, delta);
			}
		}
		dirty_ = true;
	}

	void bump(Cell c, int delta) {
		auto& v = load_[index(c)];
		if (delta < 0 && v == 0) {
			throw std::logic_error("deregister_flow: flow was not registered");
		}
		v = static_cast<std::uint32_t>(static_cast<std::int64_t>(v) + delta);
		auto& p = peak_[index(c)];
		p = std::max(p, v);
	}

	// Sparse tables: row_table_[k][r][c] = max of row r over cols [c, c + 2^k),
	// col_table_[k][c][r] likewise down column c.
	void refresh() {
		if (!dirty_) {
			return;
		}
		const std::size_t plane = load_.size();
		for (std::uint32_t r = 0; r < dim_; ++r) {
			for (std::uint32_t c = 0; c < dim_; ++c) {
				row_table_[static_cast<std::size_t>(r) * dim_ + c] = load_[static_cast<std::size_t>(r) * dim_ + c];
				col_table_[static_cast<std::size_t>(c) * dim_ + r] = load_[static_cast<std::size_t>(r) * dim_ + c];
			}
		}
		for (std::uint32_t k = 1; k < levels_; ++k) {
			const std::uint32_t half = 1u << (k - 1);
			for (auto* table : {&row_table_, &col_table_}) {
				auto& t = *table;
				const std::size_t cur = k * plane;
				const std::size_t prev = (k - 1) * plane;
				for (std::uint32_t line = 0; line < dim_; ++line) {
					const std::size_t base = static_cast<std::size_t>(line) * dim_;
					for (std::uint32_t i = 0; i + (1u << k) <= dim_; ++i) {
						t[cur + base + i] = std::max(t[prev + base + i], t[prev + base + i + half]);
					}
				}
			}
		}
		dirty_ = false;
	}

	std::uint32_t range_max(const std::vector<std::uint32_t>& t, std::uint32_t line, std::uint32_t lo,
	                        std::uint32_t hi) const {
		const std::uint32_t len = hi - lo + 1;
		const std::uint32_t k = static_cast<std::uint32_t>(std::bit_width(len)) - 1;
		const std::size_t plane = load_.size();
		const std::size_t base = k * plane + static_cast<std::size_t>(line) * dim_;
		return std::max(t[base + lo], t[base + hi + 1 - (1u << k)]);
	}

	const Placement* placement_;
	RoutingParams params_;
	std::uint32_t dim_ = 1;
	std::uint32_t levels_ = 1;
	std::vector<std::uint32_t> load_;
	std::vector<std::uint32_t> peak_;
	std::vector<std::uint32_t> row_table_;
	std::vector<std::uint32_t> col_table_;
	bool dirty_ = true;
	std::uint64_t next_id_ = 0;
};

inline HighwayGrid build_grid(const Placement& placement, double kappa, double cell_side) {
	RoutingParams rp;
	rp.kappa = kappa;
	rp.cell_side = cell_side;
	return HighwayGrid(placement, rp);
}

/// Default admission floor (bits/slot) for the SINR backend.
inline constexpr double kDefaultKappaMin = 0.05;

struct Demand {
	NodeId tx = 0;
	NodeId rx = 0;
};

/// One slot of direct single-hop transmission under the full interference
/// model. Candidates are tried farthest-first (largest distance from their
/// transmitter to the nearest admitted transmitter; ties to the lower demand
/// index); a candidate is kept only if every admitted flow, itself included,
/// still gets at least kappa_min. If nothing clears the floor, the demand
/// with the best solo rate is served alone. Nodes take part in at most one
/// admitted flow. Returns the bits delivered per demand (0 when not admitted).
inline std::vector<double> sinr_backend_step(const ChannelParams& ch, const Placement& pl,
                                             std::span<const Demand> demands,
                                             double kappa_min = kDefaultKappaMin) {
	ch.validate();
	const std::size_t k = demands.size();
	std::vector<double> delivered(k, 0.0);
	std::vector<bool> tried(k, false);
	std::vector<bool> busy(pl.size(), false);
	std::vector<std::size_t> admitted;
	std::vector<NodeId> active;
	std::vector<double> rates;

	auto rates_with = [&](std::span<const std::size_t> set) {
		active.clear();
		for (auto d : set) {
			active.push_back(demands[d].tx);
		}
		rates.assign(set.size(), 0.0);
		for (std::size_t a = 0; a < set.size(); ++a) {
			rates[a] = sinr_rate(ch, pl, demands[set[a]].tx, demands[set[a]].rx, active);
		}
	};

	for (;;) {
		std::size_t pick = k;
		double pick_score = -1.0;
		for (std::size_t d = 0; d < k; ++d) {
			if (tried[d] || busy[demands[d].tx] || busy[demands[d].rx] || demands[d].tx == demands[d].rx) {
				continue;
			}
			double score = std::numeric_limits<double>::infinity();
			for (auto a : admitted) {
				score = std::min(score, distance(pl, demands[d].tx, demands[a].tx));
			}
			if (score > pick_score) {
				pick_score = score;
				pick = d;
			}
		}
		if (pick == k) {
			break;
		}
		tried[pick] = true;
		admitted.push_back(pick);
		rates_with(admitted);
		const bool ok = std::all_of(rates.begin(), rates.end(), [&](double r) { return r >= kappa_min; });
		if (!ok) {
			admitted.pop_back();
			continue;
		}
		busy[demands[pick].tx] = true;
		busy[demands[pick].rx] = true;
	}
	if (admitted.empty()) {
		double best = 0.0;
		for (std::size_t d = 0; d < k; ++d) {
			if (demands[d].tx == demands[d].rx) {
				continue;
			}
			const std::vector<NodeId> solo{demands[d].tx};
			const double r = sinr_rate(ch, pl, demands[d].tx, demands[d].rx, solo);
			if (r > best) {
				best = r;
				admitted.assign(1, d);
			}
		}
	}
	rates_with(admitted);
	for (std::size_t a = 0; a < admitted.size(); ++a) {
		delivered[admitted[a]] = rates[a];
	}
	return delivered;
}

/// Sum of rate * distance over the flows delivered in one step.
inline double bit_meters(const Placement& pl, std::span<const Demand> demands, std::span<const double> delivered) {
	double total = 0.0;
	for (std::size_t d = 0; d < demands.size(); ++d) {
		total += delivered[d] * distance(pl, demands[d].tx, demands[d].rx);
	}
	return total;
}

struct SinrRunTrace {
	std::vector<double> bit_meters_per_slot;
	std::vector<double> throughput;  // bits/slot per demand over the slots it was pending
	std::size_t slots = 0;
	bool finished = false;
};

/// Repeats sinr_backend_step until every demand has delivered F bits or the
/// slot limit is reached.
inline SinrRunTrace sinr_backend_run(const ChannelParams& ch, const Placement& pl, std::span<const Demand> demands,
                                     double kappa_min, double F, std::size_t slot_limit) {
	SinrRunTrace trace;
	std::vector<double> got(demands.size(), 0.0);
	std::vector<std::size_t> finished_at(demands.size(), 0);
	std::vector<Demand> pending;
	std::vector<std::size_t> pending_idx;
	for (; trace.slots < slot_limit; ++trace.slots) {
		pending.clear();
		pending_idx.clear();
		for (std::size_t d = 0; d < demands.size(); ++d) {
			if (got[d] < F) {
				pending.push_back(demands[d]);
				pending_idx.push_back(d);
			}
		}
		if (pending.empty()) {
			trace.finished = true;
			break;
		}
		auto step = sinr_backend_step(ch, pl, pending, kappa_min);
		trace.bit_meters_per_slot.push_back(bit_meters(pl, pending, step));
		for (std::size_t p = 0; p < pending.size(); ++p) {
			got[pending_idx[p]] += step[p];
			if (got[pending_idx[p]] >= F) {
				finished_at[pending_idx[p]] = trace.slots + 1;
			}
		}
	}
	trace.throughput.resize(demands.size());
	for (std::size_t d = 0; d < demands.size(); ++d) {
		const auto span_slots = finished_at[d] > 0 ? finished_at[d] : trace.slots;
		trace.throughput[d] = span_slots > 0 ? std::min(got[d], F) / static_cast<double>(span_slots) : 0.0;
	}
	return trace;
}

}  // namespace viralsim

#endif  // VIRALSIM_ROUTING_HPP
