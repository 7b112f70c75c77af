#include "molcomm/fisher.hpp"

#include "molcomm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace molcomm {

UnknownSet::UnknownSet(std::initializer_list<ParamId> ids)
    : UnknownSet(std::span<const ParamId>(ids.begin(), ids.size())) {}

UnknownSet::UnknownSet(std::span<const ParamId> ids) : ids_(ids.begin(), ids.end()) {
    if (ids_.empty()) throw UsageError("unknown set must not be empty");
    std::sort(ids_.begin(), ids_.end());
    if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
        throw UsageError("unknown set contains duplicate parameters");
    }
}

std::optional<std::size_t> UnknownSet::index_of(ParamId id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
}

std::optional<double> CrlbReport::bound(ParamId id) const {
    const auto i = unknowns.index_of(id);
    if (!i) throw UsageError("parameter is not in the unknown set");
    return bounds[*i];
}

double g_term(ParamId id, const ChannelParams& p, double t) {
    const double te = t - p.release_time;
    if (!(te > 0.0)) throw DomainError("observation before release");
    if (!(p.diffusion > 0.0)) throw DomainError("diffusion coefficient must be positive");
    const double D = p.diffusion;
    const double d = p.distance;
    switch (id) {
    case ParamId::Distance:
        return (p.flow_par - d / te) / (2.0 * D);
    case ParamId::ReleaseTime:
        return 1.5 / te + p.degradation + p.flow_speed_sq() / (4.0 * D) - d * d / (4.0 * D * te * te);
    case ParamId::Diffusion:
        return ((d * d / te - 2.0 * d * p.flow_par + te * p.flow_speed_sq()) / (2.0 * D) - 3.0) / (2.0 * D);
    case ParamId::Degradation:
        return -te;
    case ParamId::FlowPar:
        return (d - p.flow_par * te) / (2.0 * D);
    case ParamId::FlowPerp:
        return -p.flow_perp * te / (2.0 * D);
    case ParamId::NumMolecules:
        if (!(p.molecules > 0.0)) throw DomainError("G term for molecules requires N > 0");
        return 1.0 / p.molecules;
    }
    throw UsageError("unknown parameter id");
}

FisherMatrix fim(const ChannelParams& p, const UnknownSet& unknowns, std::span<const double> times) {
    if (times.empty()) throw UsageError("FIM requires at least one sample time");
    const auto L = static_cast<Eigen::Index>(unknowns.size());
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(L, L);
    Eigen::VectorXd g(L);
    for (const double t : times) {
        const double mean = expected_observations(p, t);
        for (Eigen::Index i = 0; i < L; ++i) g(i) = g_term(unknowns[static_cast<std::size_t>(i)], p, t);
        for (Eigen::Index i = 0; i < L; ++i) {
            for (Eigen::Index j = i; j < L; ++j) info(i, j) += mean * (g(i) * g(j));
        }
    }
    for (Eigen::Index i = 0; i < L; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) info(i, j) = info(j, i);
    }
    return {unknowns, info, std::vector<double>(times.begin(), times.end())};
}

CrlbReport crlb(const FisherMatrix& f) {
    const auto L = f.entries.rows();
    CrlbReport report{f.unknowns, std::vector<std::optional<double>>(static_cast<std::size_t>(L)),
                      std::numeric_limits<double>::infinity(), true, false};

    const Eigen::VectorXd diag = f.entries.diagonal();
    if ((diag.array() <= 0.0).any() || !diag.allFinite()) return report;

    // Equilibrate so conditioning reflects information geometry, not units.
    const Eigen::VectorXd scale = diag.array().rsqrt();
    const Eigen::MatrixXd c = scale.asDiagonal() * f.entries * scale.asDiagonal();

    Eigen::MatrixXd c_inv;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    if (ldlt.info() == Eigen::Success && pivots.minCoeff() > kRankTolerance * c.diagonal().maxCoeff()) {
        c_inv = ldlt.solve(Eigen::MatrixXd::Identity(L, L));
    } else {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
        lu.setThreshold(kRankTolerance);
        if (!lu.isInvertible()) return report;
        c_inv = lu.inverse();
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    report.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();

    for (Eigen::Index i = 0; i < L; ++i) {
        const double b = c_inv(i, i) * scale(i) * scale(i);
        if (!(b > 0.0) || !std::isfinite(b)) return report;
        report.bounds[static_cast<std::size_t>(i)] = b;
    }
    report.singular = false;
    report.near_singular = report.condition_number > kNearSingularCondition;
    return report;
}

std::vector<std::optional<double>> normalized_crlb(const CrlbReport& report, std::span<const double> refs) {
    if (refs.size() != report.bounds.size()) throw UsageError("one reference value per unknown is required");
    std::vector<std::optional<double>> out(report.bounds.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i] == 0.0) throw DomainError("normalization reference must be nonzero");
        if (report.bounds[i]) out[i] = *report.bounds[i] / (refs[i] * refs[i]);
    }
    return out;
}

double reference_value(ParamId id, const ChannelParams& truth) {
    if (id == ParamId::ReleaseTime) return kReleaseTimeReference;
    return truth.get(id);
}

std::vector<double> reference_values(const UnknownSet& unknowns, const ChannelParams& truth) {
    std::vector<double> refs;
    for (const ParamId id : unknowns) refs.push_back(reference_value(id, truth));
    return refs;
}

double score(const ChannelParams& p, ParamId id, const ObservationSeries& obs) {
    double total = 0.0;
    for (const auto& s : obs) total += g_term(id, p, s.time) * (s.count - expected_observations(p, s.time));
    return total;
}

} // namespace molcomm
