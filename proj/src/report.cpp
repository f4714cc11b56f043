#include "centaur/report.hpp"

namespace centaur {

using nlohmann::json;

json report_to_json(const FitReport& report) {
    json folds = json::array();
    for (const auto& f : report.folds) {
        folds.push_back({{"fold", f.fold},
                         {"alpha", f.alpha},
                         {"inverse_temperature", f.inverse_temperature},
                         {"train_nll", f.train_nll},
                         {"validation_nll", f.validation_nll},
                         {"test_nll", f.test_nll},
                         {"validation_nll_by_alpha", f.validation_nll_by_alpha},
                         {"test_size", f.test_size},
                         {"iterations", f.iterations},
                         {"converged", f.converged}});
    }
    json predictions = json::array();
    for (const auto& p : report.predictions)
        predictions.push_back({{"trial_id", p.trial_id}, {"fold", p.fold}, {"probability", p.probability}});
    return json{{"model", report.model},
                {"alpha_grid", report.alpha_grid},
                {"temperature_grid", report.temperature_grid},
                {"aggregate_test_nll", report.aggregate_test_nll},
                {"choice_count", report.choice_count},
                {"all_converged", report.all_converged},
                {"participant_test_nll", report.participant_test_nll},
                {"folds", folds},
                {"predictions", predictions}};
}

FitReport report_from_json(const json& j) {
    FitReport r;
    r.model = j.at("model").get<std::string>();
    r.alpha_grid = j.value("alpha_grid", std::vector<double>{});
    r.temperature_grid = j.value("temperature_grid", std::vector<double>{});
    r.aggregate_test_nll = j.at("aggregate_test_nll").get<double>();
    r.choice_count = j.value("choice_count", 0.0);
    r.all_converged = j.value("all_converged", true);
    r.participant_test_nll = j.value("participant_test_nll", std::map<std::string, double>{});
    for (const auto& f : j.value("folds", json::array())) {
        FoldRecord rec;
        rec.fold = f.at("fold").get<std::size_t>();
        rec.alpha = f.value("alpha", 0.0);
        rec.inverse_temperature = f.value("inverse_temperature", 1.0);
        rec.train_nll = f.value("train_nll", 0.0);
        rec.validation_nll = f.value("validation_nll", 0.0);
        rec.test_nll = f.at("test_nll").get<double>();
        rec.validation_nll_by_alpha = f.value("validation_nll_by_alpha", std::vector<double>{});
        rec.test_size = f.value("test_size", std::size_t{0});
        rec.iterations = f.value("iterations", 0);
        rec.converged = f.value("converged", true);
        r.folds.push_back(std::move(rec));
    }
    for (const auto& p : j.value("predictions", json::array()))
        r.predictions.push_back({p.at("trial_id").get<std::string>(), p.at("fold").get<std::size_t>(),
                                 p.at("probability").get<double>()});
    return r;
}

} // namespace centaur
