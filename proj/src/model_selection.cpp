#include "centaur/model_selection.hpp"

#include <cmath>
#include <fstream>

#include <boost/math/special_functions/digamma.hpp>

#include "centaur/error.hpp"
#include "centaur/random.hpp"
#include "centaur/trial_io.hpp"

namespace centaur {

using boost::math::digamma;

void EvidenceMatrix::validate() const {
    if (log_evidence.cols() < 2) throw ConfigError("model selection needs at least two models");
    if (log_evidence.rows() < 1) throw ConfigError("model selection needs at least one participant");
    if (!log_evidence.allFinite()) throw ConfigError("log evidences must be finite");
    if (!model_names.empty() && static_cast<Eigen::Index>(model_names.size()) != log_evidence.cols())
        throw ConfigError("model name count does not match evidence columns");
    if (!participant_ids.empty() && static_cast<Eigen::Index>(participant_ids.size()) != log_evidence.rows())
        throw ConfigError("participant id count does not match evidence rows");
}

EvidenceMatrix read_evidence_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open evidence file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("evidence file " + path.string() + " is empty");
    const auto header = split_delimited(line, ',');
    if (header.size() < 3) throw ConfigError("evidence file needs a participant column and at least two models");

    EvidenceMatrix e;
    e.model_names.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_delimited(line, ',');
        if (cells.size() != header.size())
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
        e.participant_ids.push_back(cells[0]);
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                row.push_back(-std::stod(cells[c]));
            } catch (const std::exception&) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cells[c] + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    e.log_evidence.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(e.model_names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            e.log_evidence(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    e.validate();
    return e;
}

namespace {

Eigen::MatrixXd responsibilities(const Eigen::MatrixXd& L, const Eigen::VectorXd& alpha) {
    const double psi_sum = digamma(alpha.sum());
    Eigen::VectorXd elog(alpha.size());
    for (Eigen::Index k = 0; k < alpha.size(); ++k) elog(k) = digamma(alpha(k)) - psi_sum;
    Eigen::MatrixXd g = L.rowwise() + elog.transpose();
    for (Eigen::Index n = 0; n < g.rows(); ++n) {
        const double m = g.row(n).maxCoeff();
        g.row(n) = (g.row(n).array() - m).exp().matrix();
        g.row(n) /= g.row(n).sum();
    }
    return g;
}

double log_sum_exp(const Eigen::RowVectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

} // namespace

BmsResult vb_dirichlet(const EvidenceMatrix& evidence, const BmsOptions& options) {
    evidence.validate();
    if (!(options.prior_alpha > 0.0)) throw ConfigError("Dirichlet prior must be positive");
    const Eigen::MatrixXd& L = evidence.log_evidence;
    const Eigen::Index K = L.cols();
    const Eigen::VectorXd prior = Eigen::VectorXd::Constant(K, options.prior_alpha);

    BmsResult r;
    r.prior_alpha = options.prior_alpha;
    Eigen::VectorXd alpha = prior;
    Eigen::MatrixXd g;
    for (int it = 1; it <= options.max_iterations; ++it) {
        g = responsibilities(L, alpha);
        const Eigen::VectorXd next = prior + g.colwise().sum().transpose();
        const double change = (next - alpha).lpNorm<Eigen::Infinity>();
        alpha = next;
        r.iterations = it;
        if (change < options.tolerance) {
            r.converged = true;
            break;
        }
    }
    g = responsibilities(L, alpha);
    r.dirichlet_alpha = alpha;
    r.expected_frequencies = alpha / alpha.sum();
    r.responsibilities = g;

    // Variational free energy of the random-effects model.
    const double psi_sum = digamma(alpha.sum());
    Eigen::VectorXd elog(K);
    for (Eigen::Index k = 0; k < K; ++k) elog(k) = digamma(alpha(k)) - psi_sum;
    double f = 0.0;
    for (Eigen::Index n = 0; n < L.rows(); ++n) {
        for (Eigen::Index k = 0; k < K; ++k) {
            const double gnk = g(n, k);
            f += gnk * (L(n, k) + elog(k));
            if (gnk > 0.0) f -= gnk * std::log(gnk);
        }
    }
    double kl = std::lgamma(alpha.sum()) - std::lgamma(prior.sum());
    for (Eigen::Index k = 0; k < K; ++k)
        kl += std::lgamma(prior(k)) - std::lgamma(alpha(k)) + (alpha(k) - prior(k)) * elog(k);
    r.free_energy = f - kl;

    double f0 = 0.0;
    for (Eigen::Index n = 0; n < L.rows(); ++n) f0 += log_sum_exp(L.row(n)) - std::log(static_cast<double>(K));
    r.null_free_energy = f0;
    return r;
}

Eigen::VectorXd exceedance_probability(const Eigen::VectorXd& alpha, std::uint64_t samples, std::uint64_t seed) {
    if (samples == 0) throw ConfigError("exceedance needs at least one sample");
    const Eigen::Index K = alpha.size();
    std::vector<std::uint64_t> wins(static_cast<std::size_t>(K), 0);
    Rng rng(seed);
    for (std::uint64_t s = 0; s < samples; ++s) {
        // Normalizing the gamma draws does not change the argmax.
        Eigen::Index best = 0;
        double best_value = -1.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            const double v = rng.gamma(alpha(k));
            if (v > best_value) {
                best_value = v;
                best = k;
            }
        }
        ++wins[static_cast<std::size_t>(best)];
    }
    Eigen::VectorXd ep(K);
    for (Eigen::Index k = 0; k < K; ++k)
        ep(k) = static_cast<double>(wins[static_cast<std::size_t>(k)]) / static_cast<double>(samples);
    return ep;
}

ProtectedExceedance protected_exceedance(const BmsResult& result, const Eigen::VectorXd& exceedance) {
    ProtectedExceedance p;
    const double diff = result.free_energy - result.null_free_energy;
    p.bayes_omnibus_risk = diff > 700.0 ? 0.0 : 1.0 / (1.0 + std::exp(diff));
    const double K = static_cast<double>(exceedance.size());
    p.protected_exceedance = exceedance * (1.0 - p.bayes_omnibus_risk);
    p.protected_exceedance.array() += p.bayes_omnibus_risk / K;
    return p;
}

BmsResult random_effects_bms(const EvidenceMatrix& evidence, std::uint64_t samples, std::uint64_t seed,
                             const BmsOptions& options) {
    BmsResult r = vb_dirichlet(evidence, options);
    r.exceedance = exceedance_probability(r.dirichlet_alpha, samples, seed);
    const auto p = protected_exceedance(r, r.exceedance);
    r.protected_exceedance = p.protected_exceedance;
    r.bayes_omnibus_risk = p.bayes_omnibus_risk;
    return r;
}

BestModelTable best_model_table(const EvidenceMatrix& evidence, double display_cap) {
    evidence.validate();
    const Eigen::MatrixXd nll = -evidence.log_evidence;
    BestModelTable t;
    t.display_cap = display_cap;
    t.delta.resize(nll.rows(), nll.cols());
    t.wins.assign(static_cast<std::size_t>(nll.cols()), 0);
    for (Eigen::Index n = 0; n < nll.rows(); ++n) {
        Eigen::Index best;
        const double m = nll.row(n).minCoeff(&best);
        t.best_model.push_back(static_cast<std::size_t>(best));
        ++t.wins[static_cast<std::size_t>(best)];
        t.delta.row(n) = nll.row(n).array() - m;
    }
    return t;
}

} // namespace centaur
