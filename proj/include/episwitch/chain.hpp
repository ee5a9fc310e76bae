#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "episwitch/model.hpp"
#include "episwitch/pdmp.hpp"
#include "episwitch/rng.hpp"

namespace episwitch {

struct ChainState {
  std::vector<std::int64_t> counts;
  int env = 0;
  double time = 0.0;
};

enum class TerminalCause { Absorbed, Horizon, Truncated };

struct ChainEvent {
  double time;
  EventKind kind;
  int index;  // group for Infect/Cure, new environment for Switch
};

// Entrance times across a threshold rho (l1-norm of proportions):
// down = first t with ||x|| <= rho, up = first t with ||x|| >= rho.
struct EntranceTimes {
  double rho = 0.0;
  std::optional<double> down;
  std::optional<double> up;
};

struct ChainPath {
  std::vector<ChainEvent> events;  // filled only when recording is on
  ChainState final_state;
  TerminalCause cause = TerminalCause::Absorbed;
  std::optional<double> extinction_time;
  std::vector<EntranceTimes> entrances;
  std::uint64_t event_count = 0;
  bool events_recorded = false;
};

struct ChainOptions {
  std::optional<double> horizon;   // none: run to extinction
  std::vector<double> thresholds;  // rho values for entrance times
  std::uint64_t event_cap = 1000000000ull;
  bool record_events = true;
};

// Exact CTMC simulation (direct Gillespie).  With a finite horizon the full
// chain runs to the horizon (the environment keeps switching after the
// epidemic is absorbed); without one the run ends at extinction.
ChainPath simulate_chain(const ModelSpec& spec, std::int64_t K,
                         const std::vector<std::int64_t>& sizes, const ChainState& init,
                         const ChainOptions& opts, RngStream rng);

struct ExtinctionSummary {
  double mean = 0.0;
  double se = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
  int n_rep = 0;
  int truncated = 0;  // replicates that hit the event cap (excluded from stats)
};

// Replicate j runs on RngStream(base_seed, j); results merge by index, so the
// summary is identical for any worker count.
ExtinctionSummary monte_carlo_extinction(const ModelSpec& spec, std::int64_t K,
                                         const std::vector<std::int64_t>& sizes,
                                         const ChainState& init, int n_rep,
                                         std::uint64_t base_seed,
                                         const ChainOptions& opts = {});

struct CoupledResult {
  ChainPath chain;
  PdmpPath pdmp;
  double sup_distance = 0.0;  // sup over [0,T] of ||X^K - X|| + 1{env mismatch}
};

// Chain and PDMP driven by the same environment randomness (shared stream),
// chain initialized at floor(K x0)/K.  The epidemic jumps use an independent
// substream; the PDMP has none.
CoupledResult coupled_paths(const ModelSpec& spec, std::int64_t K,
                            const std::vector<std::int64_t>& sizes, const Vec& init_x,
                            int init_env, double T, RngStream rng,
                            double output_dt = 0.05, const StepControl& step = {});

}  // namespace episwitch
