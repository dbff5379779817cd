#include <cmath>
#include <limits>
#include <type_traits>

#include "nsum/models.hpp"

namespace nsum {

namespace {

const Interval kUnit{0.0, 1.0};

std::string rho_name(const SurveyDataset& data, std::size_t k) { return "rho[" + data.labels()[k] + "]"; }

// Wraps a sampler step so a non-finite current density names the parameter.
// `what` is a string or a callable producing one, evaluated only on failure.
template <class Name, class Fn>
auto named(Name&& what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteDensity) throw;
    std::string label;
    if constexpr (std::is_invocable_v<Name>) {
      label = what();
    } else {
      label = what;
    }
    throw Error(ErrorCode::NonFiniteDensity, label + ": " + e.what());
  }
}

class SamplerBase : public ModelSampler {
 public:
  SamplerBase(ModelSpec spec, SurveyDataset data) : spec_(std::move(spec)), data_(std::move(data)) {
    spec_.validate();
  }

  const SurveyDataset& data() const override { return data_; }
  const ModelSpec& spec() const override { return spec_; }
  ChainState initial_state() const override { return nsum::initial_state(spec_, data_); }

 protected:
  ModelSpec spec_;
  SurveyDataset data_;

  void update_hyper(ChainState& s, RandomStream& rng) const {
    s.mu = gibbs_mu(s, data_, spec_, rng);
    s.sigma = std::sqrt(gibbs_sigma2(s, data_, spec_, rng));
  }

  template <class LogDensity>
  void update_degrees(ChainState& s, const ProposalScale& scales, RandomStream& rng,
                      AcceptanceCount& tally, LogDensity&& lp) const {
    for (std::size_t i = 0; i < data_.respondents(); ++i) {
      const auto r = named([&] { return "d[" + std::to_string(i + 1) + "]"; }, [&] {
        return mh_step(s.degrees[i], [&](double d) { return lp(i, d); }, scales.degrees[i], std::nullopt,
                       BoundMode::Reject, rng);
      });
      s.degrees[i] = r.value;
      tally.record(r.accepted);
    }
  }

  // Barrier rho_k updates; returns the next tally slot.
  template <class LogDensity>
  std::size_t update_rho(ChainState& s, const ProposalScale& scales, RandomStream& rng,
                         std::span<AcceptanceCount> tally, std::size_t slot, LogDensity&& lp) const {
    if (spec_.fixed_rho) return slot;
    for (std::size_t k = 0; k < data_.groups(); ++k, ++slot) {
      const auto r = named([&] { return rho_name(data_, k); }, [&] {
        return mh_step(s.rho[k], [&](double v) { return lp(k, v); }, scales.blocks[slot], kUnit,
                       BoundMode::Reflect, rng);
      });
      s.rho[k] = r.value;
      tally[slot].record(r.accepted);
    }
    return slot;
  }

  void append_rho_names(std::vector<std::string>& names) const {
    if (spec_.fixed_rho) return;
    for (std::size_t k = 0; k < data_.groups(); ++k) names.push_back(rho_name(data_, k));
  }
};

class RandomDegreeSampler final : public SamplerBase {
 public:
  using SamplerBase::SamplerBase;

  std::vector<std::string> block_names() const override { return {"N_K"}; }
  void block_values(const ChainState& s, std::span<double> out) const override { out[0] = s.size_unknown; }

  void sweep(ChainState& s, const ProposalScale& scales, RandomStream& rng,
             std::span<AcceptanceCount> tally) const override {
    update_hyper(s, rng);
    const Interval support{static_cast<double>(data_.column_max(data_.unknown_index())),
                           static_cast<double>(data_.total_population())};
    const auto r = named("N_K", [&] {
      return mh_step(s.size_unknown, [&](double v) { return logpost_NK_random_degree(v, s, data_); },
                     scales.blocks[0], support, BoundMode::Reject, rng);
    });
    s.size_unknown = r.value;
    tally[0].record(r.accepted);
    update_degrees(s, scales, rng, tally[1],
                   [&](std::size_t i, double d) { return logpost_di_random_degree(i, d, s, data_); });
  }

  std::vector<std::string> trace_names() const override { return {"N_K", "mu", "sigma"}; }
  void trace_values(const ChainState& s, std::span<double> out) const override {
    out[0] = s.size_unknown;
    out[1] = s.mu;
    out[2] = s.sigma;
  }
};

class BarrierSampler final : public SamplerBase {
 public:
  using SamplerBase::SamplerBase;

  std::vector<std::string> block_names() const override {
    std::vector<std::string> names{"m_K"};
    append_rho_names(names);
    return names;
  }
  void block_values(const ChainState& s, std::span<double> out) const override {
    out[0] = s.size_unknown;
    if (spec_.fixed_rho) return;
    for (std::size_t k = 0; k < data_.groups(); ++k) out[1 + k] = s.rho[k];
  }

  void sweep(ChainState& s, const ProposalScale& scales, RandomStream& rng,
             std::span<AcceptanceCount> tally) const override {
    update_hyper(s, rng);
    const auto r = named("m_K", [&] {
      return mh_step(s.size_unknown, [&](double v) { return logpost_mK_barrier(v, s, data_); },
                     scales.blocks[0], kUnit, BoundMode::Reflect, rng);
    });
    s.size_unknown = r.value;
    tally[0].record(r.accepted);
    const std::size_t slot = update_rho(s, scales, rng, tally, 1, [&](std::size_t k, double v) {
      return logpost_rhok_barrier(k, v, s, data_);
    });
    update_degrees(s, scales, rng, tally[slot],
                   [&](std::size_t i, double d) { return logpost_di_barrier(i, d, s, data_); });
  }

  std::vector<std::string> trace_names() const override {
    std::vector<std::string> names{"N_K", "mu", "sigma", "m_K"};
    append_rho_names(names);
    return names;
  }
  void trace_values(const ChainState& s, std::span<double> out) const override {
    out[0] = s.size_unknown * static_cast<double>(data_.total_population());
    out[1] = s.mu;
    out[2] = s.sigma;
    out[3] = s.size_unknown;
    if (spec_.fixed_rho) return;
    for (std::size_t k = 0; k < data_.groups(); ++k) out[4 + k] = s.rho[k];
  }
};

class TransmissionSampler final : public SamplerBase {
 public:
  using SamplerBase::SamplerBase;

  std::vector<std::string> block_names() const override {
    if (spec_.fixed_tau) return {"N_K"};
    return {"w_K", "z_K"};
  }
  void block_values(const ChainState& s, std::span<double> out) const override {
    if (spec_.fixed_tau) {
      out[0] = s.size_unknown;
      return;
    }
    out[0] = s.w;
    out[1] = s.z;
  }

  void sweep(ChainState& s, const ProposalScale& scales, RandomStream& rng,
             std::span<AcceptanceCount> tally) const override {
    update_hyper(s, rng);
    const double total = static_cast<double>(data_.total_population());
    std::size_t slot = 0;
    if (spec_.fixed_tau) {
      // tau pinned: the binomial rate is tau N_K / N and the 1/N_K prior is
      // scale-free, so the random-degree conditional applies to w = tau N_K.
      const double tau = s.tau;
      const auto r = named("N_K", [&] {
        return mh_step(s.size_unknown,
                       [&](double v) { return v < total ? logpost_NK_random_degree(tau * v, s, data_) : kNegInf; },
                       scales.blocks[0], std::nullopt, BoundMode::Reject, rng);
      });
      set_size(s, r.value, tau);
      tally[slot++].record(r.accepted);
    } else {
      const Interval w_support{static_cast<double>(data_.column_max(data_.unknown_index())), total};
      const auto rw = named("w_K", [&] {
        return mh_step(s.w, [&](double v) { return logpost_wK_transmission(v, s, data_, spec_); },
                       scales.blocks[0], w_support, BoundMode::Reject, rng);
      });
      s.w = rw.value;
      tally[slot++].record(rw.accepted);
      const auto rz = named("z_K", [&] {
        return mh_step(s.z, [&](double v) { return logpost_zK_transmission(v, s, data_, spec_); },
                       scales.blocks[1], std::nullopt, BoundMode::Reject, rng);
      });
      s.z = rz.value;
      tally[slot++].record(rz.accepted);
      s.size_unknown = std::sqrt(s.w * s.z);
      s.tau = std::sqrt(s.w / s.z);
    }
    update_degrees(s, scales, rng, tally[slot],
                   [&](std::size_t i, double d) { return logpost_di_transmission(i, d, s, data_); });
  }

  std::vector<std::string> trace_names() const override { return {"N_K", "mu", "sigma", "tau_K", "w_K", "z_K"}; }
  void trace_values(const ChainState& s, std::span<double> out) const override {
    out[0] = s.size_unknown;
    out[1] = s.mu;
    out[2] = s.sigma;
    out[3] = s.tau;
    out[4] = s.w;
    out[5] = s.z;
  }

 private:
  static void set_size(ChainState& s, double size, double tau) {
    s.size_unknown = size;
    s.w = size * tau;
    s.z = size / tau;
  }
};

class CombinedSampler final : public SamplerBase {
 public:
  using SamplerBase::SamplerBase;

  bool samples_propensities() const override { return true; }

  std::vector<std::string> block_names() const override {
    std::vector<std::string> names{"m_K"};
    append_rho_names(names);
    if (!spec_.fixed_tau) names.push_back("tau_K");
    return names;
  }
  void block_values(const ChainState& s, std::span<double> out) const override {
    std::size_t j = 0;
    out[j++] = s.size_unknown;
    if (!spec_.fixed_rho) {
      for (std::size_t k = 0; k < data_.groups(); ++k) out[j++] = s.rho[k];
    }
    if (!spec_.fixed_tau) out[j++] = s.tau;
  }

  void sweep(ChainState& s, const ProposalScale& scales, RandomStream& rng,
             std::span<AcceptanceCount> tally) const override {
    update_hyper(s, rng);
    const auto r = named("m_K", [&] {
      return mh_step(s.size_unknown,
                     [&](double v) { return logpost_combined({CombinedParam::MK}, v, s, data_, spec_); },
                     scales.blocks[0], kUnit, BoundMode::Reflect, rng);
    });
    s.size_unknown = r.value;
    tally[0].record(r.accepted);
    std::size_t slot = update_rho(s, scales, rng, tally, 1, [&](std::size_t k, double v) {
      return logpost_combined({CombinedParam::RhoK, 0, k}, v, s, data_, spec_);
    });
    if (!spec_.fixed_tau) {
      const auto rt = named("tau_K", [&] {
        return mh_step(s.tau,
                       [&](double v) { return logpost_combined({CombinedParam::TauK}, v, s, data_, spec_); },
                       scales.blocks[slot], kUnit, BoundMode::Reflect, rng);
      });
      s.tau = rt.value;
      tally[slot++].record(rt.accepted);
    }
    update_degrees(s, scales, rng, tally[slot], [&](std::size_t i, double d) {
      return logpost_combined({CombinedParam::Di, i}, d, s, data_, spec_);
    });
    ++slot;

    const std::size_t groups = data_.groups();
    for (std::size_t i = 0; i < data_.respondents(); ++i) {
      for (std::size_t k = 0; k < groups; ++k) {
        const std::size_t j = i * groups + k;
        const auto rq = named([&] { return "q[" + std::to_string(i + 1) + "," + data_.labels()[k] + "]"; }, [&] {
          return mh_step(s.q[j],
                         [&](double v) { return logpost_combined({CombinedParam::Qik, i, k}, v, s, data_, spec_); },
                         scales.propensities[j], kUnit, BoundMode::Reflect, rng);
        });
        s.q[j] = rq.value;
        tally[slot].record(rq.accepted);
      }
    }
  }

  std::vector<std::string> trace_names() const override {
    std::vector<std::string> names{"N_K", "mu", "sigma", "m_K", "tau_K"};
    append_rho_names(names);
    return names;
  }
  void trace_values(const ChainState& s, std::span<double> out) const override {
    out[0] = s.size_unknown * static_cast<double>(data_.total_population());
    out[1] = s.mu;
    out[2] = s.sigma;
    out[3] = s.size_unknown;
    out[4] = s.tau;
    if (spec_.fixed_rho) return;
    for (std::size_t k = 0; k < data_.groups(); ++k) out[5 + k] = s.rho[k];
  }
};

}  // namespace

std::unique_ptr<ModelSampler> make_sampler(const ModelSpec& spec, const SurveyDataset& data) {
  switch (spec.kind) {
    case ModelKind::RandomDegree:
      return std::make_unique<RandomDegreeSampler>(spec, data);
    case ModelKind::Barrier:
      return std::make_unique<BarrierSampler>(spec, data);
    case ModelKind::Transmission:
      return std::make_unique<TransmissionSampler>(spec, data);
    case ModelKind::Combined:
      return std::make_unique<CombinedSampler>(spec, data);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown model kind");
}

}  // namespace nsum
