#include <cmath>

#include "pacvd/errors.hpp"
#include "pacvd/eval.hpp"

namespace pacvd {

void ConfusionMatrix::add(bool vulnerable, VerdictLabel predicted) {
    if (predicted == VerdictLabel::Unparseable) ++unparseable;
    const bool yes = predicted == VerdictLabel::Yes;
    if (vulnerable) ++(yes ? tp : fn);
    else ++(yes ? fp : tn);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    unparseable += o.unparseable;
    return *this;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
    const double tp = static_cast<double>(cm.tp);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn);
    const double tn = static_cast<double>(cm.tn);
    Metrics m;
    const double total = tp + fp + fn + tn;
    if (total > 0) m.accuracy = (tp + tn) / total;
    if (tp + fp > 0) m.precision = tp / (tp + fp);
    if (tp + fn > 0) m.recall = tp / (tp + fn);
    if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    const double marginals = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (marginals > 0) m.mcc = (tp * tn - fp * fn) / std::sqrt(marginals);
    return m;
}

ScoreResult score(const std::vector<std::pair<bool, VerdictLabel>>& predictions) {
    if (predictions.empty()) throw EmptyInput("no predictions to score");
    ScoreResult r;
    for (const auto& [vulnerable, label] : predictions) r.confusion.add(vulnerable, label);
    r.metrics = compute_metrics(r.confusion);
    return r;
}

}  // namespace pacvd
