#include "fkd/eval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fkd/errors.hpp"
#include "fkd/similarity.hpp"

namespace fkd {

using nlohmann::json;

GroundTruth parse_ground_truth(const json& records, const Database* db) {
    if (!records.is_array()) {
        throw LoadError("ground truth must be a JSON array of references");
    }
    GroundTruth truth;
    for (const auto& r : records) {
        ColumnPair p;
        try {
            p = {{r.at("from_table").get<std::string>(), r.at("from_column").get<std::string>()},
                 {r.at("to_table").get<std::string>(), r.at("to_column").get<std::string>()}};
        } catch (const json::exception&) {
            throw LoadError("malformed ground-truth record: " + r.dump());
        }
        if (db) {
            db->column(p.referencing);
            db->column(p.referenced);
        }
        truth.insert(std::move(p));
    }
    return truth;
}

GroundTruth load_ground_truth(const std::filesystem::path& path, const Database* db) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot read ground truth " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto records = json::parse(ss.str(), nullptr, false);
    if (records.is_discarded()) {
        throw LoadError("ground truth " + path.string() + " is not valid JSON");
    }
    return parse_ground_truth(records, db);
}

json references_to_json(const std::set<ColumnPair>& refs) {
    json out = json::array();
    for (const auto& r : refs) {
        out.push_back(r);
    }
    return out;
}

void to_json(json& j, const ScoreReport& r) {
    j = {{"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"candidate_recall", r.candidate_recall},
         {"candidate_f1", r.candidate_f1},
         {"tp", r.tp},
         {"fp", r.fp},
         {"fn", r.fn},
         {"pruning_loss", r.pruning_loss},
         {"truth_size", r.truth_size},
         {"truth_in_candidates", r.truth_in_candidates}};
}

double f1_score(double precision, double recall) {
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

ScoreReport score(const std::set<ColumnPair>& predicted, const GroundTruth& truth,
                  const std::set<ColumnPair>& candidates) {
    if (!std::includes(candidates.begin(), candidates.end(), predicted.begin(), predicted.end())) {
        throw Error("predicted references are not a subset of the candidate set");
    }
    ScoreReport r;
    for (const auto& p : predicted) {
        r.tp += truth.contains(p);
    }
    for (const auto& t : truth) {
        r.truth_in_candidates += candidates.contains(t);
    }
    r.truth_size = truth.size();
    r.fp = predicted.size() - r.tp;
    r.fn = truth.size() - r.tp;
    r.pruning_loss = truth.size() - r.truth_in_candidates;
    r.precision = ratio(r.tp, predicted.size());
    r.recall = ratio(r.tp, truth.size());
    r.f1 = f1_score(r.precision, r.recall);
    r.candidate_recall = ratio(r.tp, r.truth_in_candidates);
    r.candidate_f1 = f1_score(r.precision, r.candidate_recall);
    return r;
}

double fast_fk_score(const CandidatePair& pair, const Database& db) {
    const auto& tf = db.table(pair.referencing.table);
    const auto& cf = db.column(pair.referencing);
    const auto& cp = db.column(pair.referenced);
    const auto df = distinct_values(cf).size();
    const auto dp = distinct_values(cp).size();
    const double alignment = dp == 0 ? 0.0 : std::min(static_cast<double>(df) / static_cast<double>(dp), 1.0);
    const bool unique = tf.row_count > 0 && non_null_count(cf) == tf.row_count && df == tf.row_count;
    return 0.2 * name_similarity(cf.name, cp.name) + 0.5 * name_similarity(cf.name, pair.referenced.table) +
           0.3 * alignment - (unique ? 0.5 : 0.0);
}

} // namespace fkd
