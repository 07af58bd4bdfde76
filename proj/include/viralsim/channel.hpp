#ifndef VIRALSIM_CHANNEL_HPP
#define VIRALSIM_CHANNEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>

#include "viralsim/geometry.hpp"

namespace viralsim {

/// Gaussian interference channel. Rates are in bits (log base 2).
struct ChannelParams {
	double P = 10.0;
	double N0 = 1.0;
	double gamma = 0.0;
	double alpha = 3.0;

	void validate() const {
		if (!(P > 0.0) || !(N0 > 0.0)) {
			throw std::invalid_argument("channel: P and N0 must be positive");
		}
		if (gamma < 0.0) {
			throw std::invalid_argument("channel: gamma must be non-negative");
		}
		if (!(gamma > 0.0 || alpha > 2.0)) {
			throw std::invalid_argument("channel: need gamma > 0, or gamma = 0 and alpha > 2");
		}
		if (alpha < 0.0) {
			throw std::invalid_argument("channel: alpha must be non-negative");
		}
	}
};

/// min(1, exp(-gamma d) / d^alpha); 1 at d = 0.
inline double attenuation(const ChannelParams& ch, double d) {
	if (d < 0.0) {
		throw std::invalid_argument("attenuation: negative distance");
	}
	if (d == 0.0) {
		return 1.0;
	}
	const double raw = std::exp(-ch.gamma * d) / std::pow(d, ch.alpha);
	return std::min(1.0, raw);
}

/// Rate from tx to rx with every other member of `active` interfering.
inline double sinr_rate(const ChannelParams& ch, const Placement& pl, NodeId tx, NodeId rx,
                        std::span<const NodeId> active) {
	if (std::find(active.begin(), active.end(), tx) == active.end()) {
		throw std::invalid_argument("sinr_rate: transmitter is not active");
	}
	if (std::find(active.begin(), active.end(), rx) != active.end()) {
		throw std::invalid_argument("sinr_rate: receiver is transmitting (half-duplex)");
	}
	const Point at_rx = pl.at(rx);
	double interference = 0.0;
	for (NodeId k : active) {
		if (k != tx) {
			interference += ch.P * attenuation(ch, euclidean(pl.at(k), at_rx));
		}
	}
	const double signal = ch.P * attenuation(ch, euclidean(pl.at(tx), at_rx));
	return std::log2(1.0 + signal / (ch.N0 + interference));
}

/// sup over d > 0 of attenuation(d) * d. Closed form for gamma = 0; for
/// gamma > 0 the product is quasi-concave (minimum of the increasing d and a
/// unimodal tail), so a golden-section search over a bracket finds it.
inline double attenuation_distance_sup(const ChannelParams& ch) {
	ch.validate();
	if (ch.gamma == 0.0) {
		return 1.0;  // d on [0,1], d^(1-alpha) < 1 beyond
	}
	auto f = [&](double d) { return attenuation(ch, d) * d; };
	double lo = 0.0;
	double hi = 10.0 + (ch.alpha < 1.0 ? 4.0 * (1.0 - ch.alpha) / ch.gamma : 0.0);
	const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
	double a = hi - inv_phi * (hi - lo);
	double b = lo + inv_phi * (hi - lo);
	double fa = f(a);
	double fb = f(b);
	while (hi - lo > 1e-12) {
		if (fa < fb) {
			lo = a;
			a = b;
			fa = fb;
			b = lo + inv_phi * (hi - lo);
			fb = f(b);
		} else {
			hi = b;
			b = a;
			fb = fa;
			a = hi - inv_phi * (hi - lo);
			fa = f(a);
		}
	}
	return f(0.5 * (lo + hi));
}

/// Per-slot bit-meter capacity of n nodes: at most n/2 pairs, each bounded by
/// (P/N0) * sup(l(d) d) nats, converted to bits.
inline double bit_meter_budget(const ChannelParams& ch, std::size_t n) {
	const double per_pair = ch.P / ch.N0 * attenuation_distance_sup(ch) / std::numbers::ln2;
	return per_pair * static_cast<double>(n) / 2.0;
}

}  // namespace viralsim

#endif  // VIRALSIM_CHANNEL_HPP
