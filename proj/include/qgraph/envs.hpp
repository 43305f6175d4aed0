#pragma once

// Experiment environments: Baird's star counterexample with linear values,
// the three-state offline example, and a kinematic peg-in-hole point mass.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qgraph/finite_mdp.hpp"
#include "qgraph/graph_memory.hpp"

namespace qgraph::envs {

// ---------------------------------------------------------------- Baird

struct BairdConfig {
  double gamma = 0.9;
  double lr = 0.1;
  std::array<double, 8> initial_weights{10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  std::size_t steps = 100000;
  bool bounded = false;
  std::size_t record_every = 1;  // trajectory sampling stride

  void validate() const;
};

struct BairdTrace {
  std::vector<std::size_t> step;
  std::vector<std::array<double, 8>> weights;
  std::vector<std::array<double, 7>> values;
  bool diverged = false;  // weights became non-finite
  std::array<double, 8> final_weights{};
  std::array<double, 7> final_values{};
};

// V_i = w0 + 2 w_i for i = 1..6, V_7 = 2 w0 + w7.
std::array<double, 7> baird_values(const std::array<double, 8>& w);

// Synchronous semi-gradient TD(0) over all seven states; every state moves
// to state 7 with reward 0. Bounded mode lifts each target to at least 0.
BairdTrace baird_run(const BairdConfig& config);

// Positive init with w0 the largest weight, drawn around the default.
std::array<double, 8> baird_random_init(std::mt19937_64& rng);

// ---------------------------------------------------- educational example

inline constexpr std::array<double, 2> kEduS0{0.0, 0.0};
inline constexpr std::array<double, 2> kEduS1{-1.0, 1.0};
inline constexpr std::array<double, 2> kEduS2{1.0, 1.0};

struct EduTransition {
  std::size_t index = 0;
  std::array<double, 2> state{};
  std::array<double, 2> action{};
  double reward = 0.0;
  std::array<double, 2> next_state{};
  bool terminal = false;
};

// s1->s0 (terminal), s1->s2, s2->s1, s2->s2.
std::array<EduTransition, 4> edu_transitions();

inline constexpr double kEduGamma = 0.9;

struct EduConfig {
  double gamma = kEduGamma;
  double lr = 1e-3;
  std::size_t epochs = 10000;
};

struct EduResult {
  // q[seed][k] is the final prediction for the k-th transition of the subset.
  std::vector<std::size_t> members;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> q;
  std::vector<TransitionClass> classes;
};

// Offline critic training on a frozen subset of the four transitions
// (bit i of `mask` selects transition i). Bootstrap actions are the known
// action from s' with the highest current Q, or the zero action when s' has
// no stored outgoing transition.
EduResult edu_offline_experiment(unsigned mask, std::span<const std::uint64_t> seeds,
                                 const EduConfig& config = {});

// Classes of the subset's transitions in the data graph built from them.
std::vector<TransitionClass> edu_classify(unsigned mask);

// ------------------------------------------------------------ point mass

struct PointMassConfig {
  double cube_side = 0.20;
  double block_width = 0.05;
  double block_height = 0.05;
  double hole_diameter = 0.02;
  double peg_diameter = 0.01;
  double step_scale = 0.01;
  double reward_scale = 0.03;
  double terminal_radius = 0.005;
  std::size_t episode_length = 200;
  std::array<double, 3> goal{0.0, 0.0, -0.10};
  double noise_sigma = 0.0;

  double half_side() const { return cube_side / 2.0; }
  double floor() const { return -half_side(); }
  double block_top() const { return floor() + block_height; }
  // Horizontal distance from the hole axis that the peg centre may take
  // inside the hole.
  double hole_clearance() const { return (hole_diameter - peg_diameter) / 2.0; }

  void validate() const;
};

struct EnvStep {
  std::array<double, 3> next_state{};
  double reward = 0.0;
  bool terminal = false;
  std::array<double, 3> executed_action{};
};

double pointmass_reward(const PointMassConfig& config, std::span<const double> p);
bool pointmass_in_material(const PointMassConfig& config, std::span<const double> p);
bool pointmass_in_cube(const PointMassConfig& config, std::span<const double> p);

EnvStep pointmass_step(const PointMassConfig& config, std::span<const double> state,
                       std::span<const double> action, std::mt19937_64& rng);

// Uniform over the free space above the block top.
std::array<double, 3> pointmass_reset(const PointMassConfig& config, std::mt19937_64& rng);

}  // namespace qgraph::envs
