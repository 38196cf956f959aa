// One left agent p and two right agents a1, a2 with outside options -1.
// p plays matching pennies with a1 (value 0) and a game worth 1 with a2, so
// DA pairs p with a2. The maximin strategies there have zero instability;
// switching p to its second action costs a subsidy of 1.
//
// Run: ./example_one

#include <cstdio>

#include "matchlearn/bandit.hpp"
#include "matchlearn/instability.hpp"

using namespace matchlearn;

int main() {
  const MarketInstance instance(1, 2,
                                {PayoffMatrix{{1, -1}, {-1, 1}}, PayoffMatrix{{1, 1}, {1, 0}}},
                                {-1.0}, {-1.0, -1.0});
  const Matrix values = compute_game_values(instance);
  std::printf("V*(p,a1) = %g  V*(p,a2) = %g\n", values(0, 0), values(0, 1));

  const Matching matching = deferred_acceptance(value_preferences(instance, values));
  std::printf("DA matching: %s\n", matching.serialize().c_str());

  StrategyProfile equilibrium(1, 2);
  equilibrium.set({Side::Left, 0}, solve_game(instance.game(0, 1)).row_strategy);
  equilibrium.set({Side::Right, 1}, MixedStrategy({0.0, 1.0}));
  std::printf("MI at the equilibrium: %g\n",
              matching_instability(instance, matching, equilibrium).value);

  StrategyProfile deviation = equilibrium;
  deviation.set({Side::Left, 0}, MixedStrategy({0.0, 1.0}));
  const InstabilityReport report = matching_instability(instance, matching, deviation);
  std::printf("MI after p deviates: %g (subsidy to p: %g)\n", report.value,
              report.subsidies.left[0]);

  // Learning from noiseless rewards: the per-step instability dies out.
  EpisodeConfig config;
  config.horizon = 200;
  config.noise_scale = 0.0;
  config.seed = 1;
  double regret = 0.0;
  double late = 0.0;
  for (const StepRecord& step : run_episode(instance, config)) {
    regret += step.mi;
    if (step.t > 150) late += step.mi;
  }
  std::printf("UCB-MG over %zu steps: cumulative MI %g, over the last 50 steps %g\n",
              config.horizon, regret, late);
  return 0;
}
