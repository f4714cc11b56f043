#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace centaur {

// participants x models matrix of log evidences (here: minus held-out NLL).
struct EvidenceMatrix {
    Eigen::MatrixXd log_evidence;
    std::vector<std::string> model_names;
    std::vector<std::string> participant_ids;

    void validate() const;  // ConfigError on violations
};

// CSV with header "participant,<model>,<model>,..." holding per-participant NLLs;
// log evidence is their negation.
EvidenceMatrix read_evidence_csv(const std::filesystem::path& path);

struct BmsOptions {
    double prior_alpha = 1.0;
    double tolerance = 1e-6;
    int max_iterations = 1000;
};

struct BmsResult {
    Eigen::VectorXd dirichlet_alpha;
    Eigen::VectorXd expected_frequencies;
    Eigen::MatrixXd responsibilities;  // participants x models
    Eigen::VectorXd exceedance;
    Eigen::VectorXd protected_exceedance;
    double bayes_omnibus_risk = 0.0;
    double free_energy = 0.0;       // variational bound, random-effects model
    double null_free_energy = 0.0;  // log evidence of the equal-frequency null
    double prior_alpha = 1.0;
    int iterations = 0;
    bool converged = false;
};

// Variational Dirichlet posterior over model frequencies. Non-convergence is
// reported through `converged`, not thrown.
BmsResult vb_dirichlet(const EvidenceMatrix& evidence, const BmsOptions& options = {});

// Monte-Carlo probability that each model has the largest frequency under
// Dirichlet(alpha). Deterministic given seed.
Eigen::VectorXd exceedance_probability(const Eigen::VectorXd& alpha, std::uint64_t samples, std::uint64_t seed);

struct ProtectedExceedance {
    Eigen::VectorXd protected_exceedance;
    double bayes_omnibus_risk = 0.0;
};

// BOR = 1 / (1 + exp(F1 - F0)); protected EP = EP (1 - BOR) + BOR / K.
ProtectedExceedance protected_exceedance(const BmsResult& result, const Eigen::VectorXd& exceedance);

// Runs all three steps and fills every BmsResult field.
BmsResult random_effects_bms(const EvidenceMatrix& evidence, std::uint64_t samples, std::uint64_t seed,
                             const BmsOptions& options = {});

// Per-participant NLL difference to the best model (from NLLs = -log evidence).
struct BestModelTable {
    std::vector<std::size_t> best_model;  // per participant
    Eigen::MatrixXd delta;                // NLL minus the participant's best NLL
    std::vector<std::size_t> wins;        // participants best fit by each model
    double display_cap = 10.0;            // differences above this render as "> cap"
};

BestModelTable best_model_table(const EvidenceMatrix& evidence, double display_cap = 10.0);

} // namespace centaur
