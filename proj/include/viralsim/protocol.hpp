#ifndef VIRALSIM_PROTOCOL_HPP
#define VIRALSIM_PROTOCOL_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "viralsim/geometry.hpp"
#include "viralsim/rng.hpp"
#include "viralsim/routing.hpp"
#include "viralsim/socialgraph.hpp"

namespace viralsim {

using Slot = std::int64_t;

enum class Status : std::uint8_t { Inactive, Eager, Active };

struct AlgorithmParams {
	double epsilon = 0.0;
	double L = std::numeric_limits<double>::infinity();
	int D = 1;
	double F = 1.0;
	double epsilon_prime = 0.0;
	double sigma = 1.0;
	// Divide each transmitter's slot among its actual receivers instead of
	// the fixed six-way round robin.
	bool share_by_receivers = false;

	/// Social hops searched for an active node: floor(2 eps D + 1), at least 1.
	int search_depth() const noexcept {
		return std::max(1, static_cast<int>(std::floor(2.0 * epsilon * D + 1.0)));
	}

	/// Step 3 eligibility: social distance to the source below eps D + 1.
	bool may_s_request(int hops_to_source) const noexcept {
		return hops_to_source >= 0 && static_cast<double>(hops_to_source) < epsilon * D + 1.0;
	}

	void validate() const {
		if (!(epsilon >= 0.0 && epsilon <= 0.5)) {
			throw std::invalid_argument("epsilon must lie in [0, 0.5]");
		}
		if (!(L > 0.0)) {
			throw std::invalid_argument("L must be positive");
		}
		if (D < 0) {
			throw std::invalid_argument("D must be non-negative");
		}
		if (!(F > 0.0)) {
			throw std::invalid_argument("F must be positive");
		}
	}
};

/// Distance threshold 8 sqrt(n^(1-eps') log n / (sigma pi)).
inline double default_L(std::size_t n, double epsilon_prime, double sigma) {
	const double nn = static_cast<double>(n);
	return 8.0 * std::sqrt(std::pow(nn, 1.0 - epsilon_prime) * std::log(nn) / (sigma * std::numbers::pi));
}

/// Balanced binary tree filled in arrival order. Entries 0 and 1 hang off
/// the owner; entry k >= 2 hangs off entry k/2 - 1, so entries 2k+2 and
/// 2k+3 are the children of entry k.
class ScheduleTree {
public:
	static std::optional<std::size_t> parent_position(std::size_t k) noexcept {
		if (k < 2) {
			return std::nullopt;
		}
		return k / 2 - 1;
	}

	/// Hops from the owner: floor(log2(k + 2)).
	static int depth_of(std::size_t k) noexcept { return static_cast<int>(std::bit_width(k + 2)) - 1; }

	std::size_t append(NodeId node) {
		entries_.push_back(node);
		return entries_.size() - 1;
	}

	NodeId parent_of(std::size_t k, NodeId owner) const {
		auto p = parent_position(k);
		return p ? entries_.at(*p) : owner;
	}

	std::span<const NodeId> entries() const noexcept { return entries_; }
	std::size_t size() const noexcept { return entries_.size(); }
	int depth() const noexcept { return entries_.empty() ? 0 : depth_of(entries_.size() - 1); }

private:
	std::vector<NodeId> entries_;
};

struct NodeState {
	Status status = Status::Inactive;
	std::optional<NodeId> assigned_parent;
	NodeId tree_owner = 0;
	std::size_t tree_position = 0;
	FlowKind kind = FlowKind::L;
	ScheduleTree ltree;
	ScheduleTree stree;
	double received_bits = 0.0;
	Slot became_eager_at = -1;
	Slot became_active_at = -1;
	Slot assigned_at = -1;
	Slot stream_started_at = -1;
	int wait_generations = 0;  // unfinished tree ancestors when assigned
	double request_distance = 0.0;
};

enum class RequestOutcome : std::uint8_t { LRequest, SRequest, Wait };

struct NodeRecord {
	Slot became_eager = -1;
	Slot became_active = -1;
	std::int64_t parent = -1;
	FlowKind kind = FlowKind::L;
	double distance = 0.0;
};

struct RunResult {
	std::size_t n = 0;
	NodeId source = 0;
	Seed seed = 0;
	std::size_t target_nodes = 0;  // nodes in the source's component
	Slot T = 0;
	Slot slots_run = 0;
	bool completed = false;
	bool flagged = false;
	bool stranded = false;
	std::size_t unfinished_nodes = 0;
	int max_fanout = 0;
	int fanout_limit = 6;
	std::size_t fanout_violations = 0;
	int max_tree_depth = 0;
	std::size_t tree_depth_violations = 0;
	int max_wait_generations = 0;
	std::size_t l_transfers = 0;
	std::size_t s_transfers = 0;
	std::uint32_t peak_cell_load = 0;
	double L = 0.0;
	int D = 0;
	int search_depth = 1;
	double max_l_request_distance = 0.0;
	double max_l_transfer_distance = 0.0;
	double max_s_transfer_distance = 0.0;
	std::uint32_t grid_dim = 0;
	std::vector<std::uint32_t> cell_peaks;
	std::vector<NodeRecord> nodes;

	std::vector<Slot> completion_slots() const {
		std::vector<Slot> out;
		out.reserve(nodes.size());
		for (const auto& r : nodes) {
			out.push_back(r.became_active);
		}
		return out;
	}
};

/// The draw used by node x for a request in a given slot: counter-based, so
/// it does not depend on the order other nodes are processed in.
inline std::uint64_t request_draw(Seed seed, Slot slot, NodeId x, FlowKind kind, std::size_t choices) {
	CounterStream s(mix_seed({seed, static_cast<std::uint64_t>(slot), x, static_cast<std::uint64_t>(kind)}));
	return uniform_below(s, choices);
}

inline bool file_complete(double received, double F) noexcept { return received >= F * (1.0 - 1e-9); }

/// One dissemination run in discrete slots. Requesting and scheduling are
/// event driven: a waiting eager node is only re-examined after some node in
/// its search neighborhood turns active, which is the only thing that can
/// change its candidate set.
class Simulator {
public:
	Simulator(const SocialGraph& graph, const Placement& placement, const AlgorithmParams& params,
	          const RoutingParams& routing, NodeId source, Seed seed)
	    : graph_(&graph),
	      placement_(&placement),
	      params_(params),
	      grid_(placement, routing),
	      source_(source),
	      seed_(seed),
	      depth_(params.search_depth()) {
		params_.validate();
		const std::size_t n = graph.size();
		if (placement.size() != n) {
			throw std::invalid_argument("graph and placement sizes differ");
		}
		if (source >= n) {
			throw std::out_of_range("source out of range");
		}
		if (graph.degree(source) == 0) {
			throw std::invalid_argument("source is isolated");
		}
		nodes_.resize(n);
		flow_of_.assign(n, kNoFlow);
		tx_load_.assign(n, 0);
		waiting_.assign(n, false);
		queued_.assign(n, false);
		waiting_on_.resize(n);
		hops_to_source_ = hop_distances(graph, source);
		target_ = static_cast<std::size_t>(
		    std::count_if(hops_to_source_.begin(), hops_to_source_.end(), [](int d) { return d != kUnreached; }));

		auto& s = nodes_[source];
		s.status = Status::Active;
		s.received_bits = params_.F;
		s.became_active_at = 0;
		active_count_ = 1;
		for (NodeId v : graph.neighbors(source)) {
			make_eager(v, 0);
		}
	}

	Slot slot() const noexcept { return slot_; }
	const NodeState& node(NodeId i) const { return nodes_.at(i); }
	const HighwayGrid& grid() const noexcept { return grid_; }
	std::span<const FlowPlan> flows() const noexcept { return flows_; }
	std::size_t active_count() const noexcept { return active_count_; }
	std::size_t target_count() const noexcept { return target_; }
	bool done() const noexcept { return active_count_ == target_; }
	const AlgorithmParams& params() const noexcept { return params_; }

	/// Nothing can change any more: no flows, nothing to open, nobody to re-examine.
	bool stuck() const noexcept { return flows_.empty() && ready_.empty() && to_process_.empty() && !done(); }

	/// Active members of x's search neighborhood within distance L, ascending.
	std::vector<NodeId> l_candidates(NodeId x) const {
		std::vector<NodeId> out;
		const Point px = placement_->at(x);
		auto consider = [&](NodeId v) {
			if (nodes_[v].status == Status::Active && euclidean(px, (*placement_)[v]) <= params_.L) {
				out.push_back(v);
			}
		};
		if (depth_ == 1) {
			for (NodeId v : graph_->neighbors(x)) {
				consider(v);
			}
			return out;
		}
		auto shells = bfs_neighborhood(*graph_, x, depth_);
		for (std::size_t d = 1; d < shells.size(); ++d) {
			for (NodeId v : shells[d]) {
				consider(v);
			}
		}
		std::sort(out.begin(), out.end());
		return out;
	}

	std::vector<NodeId> s_candidates(NodeId x) const {
		std::vector<NodeId> out;
		for (NodeId v : graph_->neighbors(x)) {
			if (nodes_[v].status == Status::Active) {
				out.push_back(v);
			}
		}
		return out;
	}

	/// Steps 1-4 of the requesting phase for one eager, unassigned node.
	RequestOutcome requesting_step(NodeId x) {
		auto& st = nodes_.at(x);
		if (st.status != Status::Eager || st.assigned_parent) {
			throw std::logic_error("requesting_step: node is not eager and unassigned");
		}
		auto near = l_candidates(x);
		if (!near.empty()) {
			const NodeId y = near[request_draw(seed_, slot_, x, FlowKind::L, near.size())];
			schedule_request(y, x, FlowKind::L);
			waiting_[x] = false;
			return RequestOutcome::LRequest;
		}
		if (params_.may_s_request(hops_to_source_[x])) {
			auto hop1 = s_candidates(x);
			if (!hop1.empty()) {
				const NodeId y = hop1[request_draw(seed_, slot_, x, FlowKind::S, hop1.size())];
				schedule_request(y, x, FlowKind::S);
				waiting_[x] = false;
				return RequestOutcome::SRequest;
			}
		}
		waiting_[x] = true;
		return RequestOutcome::Wait;
	}

	/// Appends the requester to y's tree of the given kind and records the
	/// tree parent as its designated transmitter.
	NodeId schedule_request(NodeId y, NodeId requester, FlowKind kind) {
		auto& owner = nodes_.at(y);
		auto& req = nodes_.at(requester);
		if (owner.status != Status::Active) {
			throw std::logic_error("schedule_request: target is not active");
		}
		if (req.assigned_parent) {
			throw std::logic_error("schedule_request: requester already assigned");
		}
		if (req.status != Status::Eager) {
			throw std::logic_error("schedule_request: requester is not eager");
		}
		auto& tree = kind == FlowKind::L ? owner.ltree : owner.stree;
		const std::size_t pos = tree.append(requester);
		const NodeId parent = tree.parent_of(pos, y);
		req.assigned_parent = parent;
		req.tree_owner = y;
		req.tree_position = pos;
		req.kind = kind;
		req.assigned_at = slot_;
		req.request_distance = distance(*placement_, requester, y);

		int unfinished = 0;
		for (auto p = ScheduleTree::parent_position(pos); p; p = ScheduleTree::parent_position(*p)) {
			if (nodes_[tree.entries()[*p]].status != Status::Active) {
				++unfinished;
			}
		}
		req.wait_generations = unfinished;

		if (nodes_[parent].status == Status::Active) {
			ready_.push_back(requester);
		} else {
			waiting_on_[parent].push_back(requester);
		}
		return parent;
	}

	/// Opens pending streams, refreshes rates if the flow set changed,
	/// accrues one slot of bits and settles completions. Advances the slot.
	void transmission_step() {
		std::sort(ready_.begin(), ready_.end());
		for (NodeId rx : ready_) {
			open_flow(rx);
		}
		ready_.clear();
		if (flows_changed_) {
			grid_.assign_rates(flows_);
			flows_changed_ = false;
		}
		completed_.clear();
		for (const auto& f : flows_) {
			auto& st = nodes_[f.rx];
			const double share = params_.share_by_receivers ? static_cast<double>(tx_load_[f.tx]) : 6.0;
			st.received_bits += f.rate / share;
			if (file_complete(st.received_bits, params_.F)) {
				completed_.push_back(f.rx);
			}
		}
		std::sort(completed_.begin(), completed_.end());
		const Slot end = slot_ + 1;
		for (NodeId x : completed_) {
			close_flow(x);
			activate(x, end);
		}
		slot_ = end;
	}

	/// One full slot: requests from every node due for (re-)examination in
	/// ascending index order, then the transmission phase.
	void step() {
		std::vector<NodeId> due;
		due.swap(to_process_);
		std::sort(due.begin(), due.end());
		for (NodeId x : due) {
			queued_[x] = false;
			const auto& st = nodes_[x];
			if (st.status == Status::Eager && !st.assigned_parent) {
				requesting_step(x);
			}
		}
		transmission_step();
	}

	RunResult result() const {
		RunResult r;
		const std::size_t n = nodes_.size();
		r.n = n;
		r.source = source_;
		r.seed = seed_;
		r.target_nodes = target_;
		r.slots_run = slot_;
		r.completed = done();
		r.max_fanout = max_fanout_;
		r.peak_cell_load = grid_.max_peak();
		r.L = params_.L;
		r.D = params_.D;
		r.search_depth = depth_;
		r.grid_dim = grid_.rows();
		r.cell_peaks.assign(grid_.peaks().begin(), grid_.peaks().end());
		r.nodes.resize(n);
		for (NodeId i = 0; i < n; ++i) {
			const auto& st = nodes_[i];
			auto& rec = r.nodes[i];
			rec.became_eager = st.became_eager_at;
			rec.became_active = st.became_active_at;
			if (st.assigned_parent) {
				rec.parent = *st.assigned_parent;
				rec.kind = st.kind;
				rec.distance = distance(*placement_, i, *st.assigned_parent);
			}
			r.max_tree_depth = std::max({r.max_tree_depth, st.ltree.depth(), st.stree.depth()});
			for (const auto* t : {&st.ltree, &st.stree}) {
				const auto bound = static_cast<int>(std::ceil(std::log2(static_cast<double>(t->size()) + 1.0)));
				if (t->depth() > bound) {
					++r.tree_depth_violations;
				}
			}
			if (hops_to_source_[i] != kUnreached) {
				if (st.status == Status::Active) {
					r.T = std::max(r.T, st.became_active_at);
				} else {
					++r.unfinished_nodes;
				}
			}
			if (st.status == Status::Active && st.assigned_parent) {
				r.max_wait_generations = std::max(r.max_wait_generations, st.wait_generations);
				if (st.kind == FlowKind::L) {
					++r.l_transfers;
					r.max_l_request_distance = std::max(r.max_l_request_distance, st.request_distance);
					r.max_l_transfer_distance = std::max(r.max_l_transfer_distance, rec.distance);
				} else {
					++r.s_transfers;
					r.max_s_transfer_distance = std::max(r.max_s_transfer_distance, rec.distance);
				}
			}
		}
		if (!r.completed) {
			r.T = slot_;
		}
		return r;
	}


private:
	static constexpr std::size_t kNoFlow = ~std::size_t{0};

	void make_eager(NodeId v, Slot at) {
		auto& st = nodes_[v];
		if (st.status != Status::Inactive) {
			return;
		}
		st.status = Status::Eager;
		st.became_eager_at = at;
		enqueue(v);
	}

	void enqueue(NodeId v) {
		if (!queued_[v]) {
			queued_[v] = true;
			to_process_.push_back(v);
		}
	}

	void open_flow(NodeId rx) {
		auto& st = nodes_[rx];
		const NodeId tx = *st.assigned_parent;
		flow_of_[rx] = flows_.size();
		flows_.push_back(grid_.register_flow(tx, rx, st.kind));
		st.stream_started_at = slot_;
		max_fanout_ = std::max(max_fanout_, static_cast<int>(++tx_load_[tx]));
		flows_changed_ = true;
	}

	void close_flow(NodeId rx) {
		const std::size_t idx = flow_of_[rx];
		const FlowPlan f = flows_[idx];
		grid_.deregister_flow(f);
		--tx_load_[f.tx];
		if (idx + 1 != flows_.size()) {
			flows_[idx] = flows_.back();
			flow_of_[flows_[idx].rx] = idx;
		}
		flows_.pop_back();
		flow_of_[rx] = kNoFlow;
		flows_changed_ = true;
	}

	void activate(NodeId x, Slot at) {
		auto& st = nodes_[x];
		st.status = Status::Active;
		st.received_bits = params_.F;
		st.became_active_at = at;
		++active_count_;
		for (NodeId child : waiting_on_[x]) {
			ready_.push_back(child);
		}
		waiting_on_[x].clear();
		waiting_on_[x].shrink_to_fit();
		for (NodeId v : graph_->neighbors(x)) {
			make_eager(v, at);
		}
		// x joining the active set can only help nodes that are currently
		// waiting and have x inside their search neighborhood.
		if (depth_ == 1) {
			for (NodeId v : graph_->neighbors(x)) {
				if (waiting_[v]) {
					enqueue(v);
				}
			}
		} else {
			auto shells = bfs_neighborhood(*graph_, x, depth_);
			for (std::size_t d = 1; d < shells.size(); ++d) {
				for (NodeId v : shells[d]) {
					if (waiting_[v]) {
						enqueue(v);
					}
				}
			}
		}
	}

	const SocialGraph* graph_;
	const Placement* placement_;
	AlgorithmParams params_;
	HighwayGrid grid_;
	NodeId source_;
	Seed seed_;
	int depth_;
	Slot slot_ = 0;

	std::vector<NodeState> nodes_;
	std::vector<int> hops_to_source_;
	std::size_t target_ = 0;
	std::size_t active_count_ = 0;

	std::vector<FlowPlan> flows_;
	std::vector<std::size_t> flow_of_;
	std::vector<std::uint32_t> tx_load_;
	bool flows_changed_ = false;
	int max_fanout_ = 0;

	std::vector<NodeId> to_process_;
	std::vector<bool> queued_;
	std::vector<bool> waiting_;
	std::vector<std::vector<NodeId>> waiting_on_;
	std::vector<NodeId> ready_;
	std::vector<NodeId> completed_;
};

/// Runs to completion of the source's component or slot_limit. A run that
/// hits the limit, or can no longer make progress, is flagged.
inline RunResult run(const SocialGraph& graph, const Placement& placement, const AlgorithmParams& params,
                     const RoutingParams& routing, NodeId source, Slot slot_limit, Seed seed) {
	if (slot_limit <= 0) {
		throw std::invalid_argument("run: slot_limit must be positive");
	}
	Simulator sim(graph, placement, params, routing, source, seed);
	bool stuck = false;
	while (!sim.done() && sim.slot() < slot_limit) {
		if (sim.stuck()) {
			stuck = true;
			break;
		}
		sim.step();
	}
	RunResult r = sim.result();
	r.stranded = stuck;
	r.flagged = !r.completed;
	r.fanout_limit = params.epsilon == 0.0 && std::isinf(params.L) ? 4 : 6;
	r.fanout_violations = r.max_fanout > r.fanout_limit ? 1 : 0;
	return r;
}

/// Time for a fixed-rate WAN to serve every receiver one after another.
inline double wan_baseline(std::size_t n_receivers, double F, double wan_rate) {
	if (!(wan_rate > 0.0)) {
		throw std::invalid_argument("wan_baseline: wan_rate must be positive");
	}
	return static_cast<double>(n_receivers) * F / wan_rate;
}

inline nlohmann::ordered_json summary_json(const RunResult& r) {
	nlohmann::ordered_json j;
	j["n"] = r.n;
	j["source"] = r.source;
	j["seed"] = r.seed;
	j["target_nodes"] = r.target_nodes;
	j["T"] = r.T;
	j["slots_run"] = r.slots_run;
	j["completed"] = r.completed;
	j["flagged"] = r.flagged;
	j["stranded"] = r.stranded;
	j["unfinished_nodes"] = r.unfinished_nodes;
	j["max_fanout"] = r.max_fanout;
	j["fanout_limit"] = r.fanout_limit;
	j["fanout_violations"] = r.fanout_violations;
	j["max_tree_depth"] = r.max_tree_depth;
	j["tree_depth_violations"] = r.tree_depth_violations;
	j["max_wait_generations"] = r.max_wait_generations;
	j["l_transfers"] = r.l_transfers;
	j["s_transfers"] = r.s_transfers;
	j["peak_cell_load"] = r.peak_cell_load;
	j["L"] = std::isinf(r.L) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(r.L);
	j["D"] = r.D;
	j["search_depth"] = r.search_depth;
	j["max_l_request_distance"] = r.max_l_request_distance;
	j["max_l_transfer_distance"] = r.max_l_transfer_distance;
	j["max_s_transfer_distance"] = r.max_s_transfer_distance;
	j["completion_slots"] = r.completion_slots();
	return j;
}

/// One row per node: id,became_eager,became_active,parent,kind,distance.
inline void write_nodes_csv(std::ostream& os, const RunResult& r) {
	os << "id,became_eager,became_active,parent,kind,distance\n";
	os.precision(17);
	for (std::size_t i = 0; i < r.nodes.size(); ++i) {
		const auto& rec = r.nodes[i];
		os << i << ',' << rec.became_eager << ',' << rec.became_active << ',' << rec.parent << ','
		   << (rec.parent < 0 ? "" : to_string(rec.kind)) << ',' << rec.distance << '\n';
	}
}

}  // namespace viralsim

#endif  // VIRALSIM_PROTOCOL_HPP
