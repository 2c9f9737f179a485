#include "mlsm/family.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mlsm/error.hpp"

namespace mlsm {

namespace {

double clamp_x(double x, const FamilySpec& f) {
    return f.bounded_domain() ? std::clamp(x, -f.clamp, f.clamp) : x;
}

// log(1 + e^x) without overflow for large |x|.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::Gaussian: return "gaussian";
        case FamilyKind::Poisson: return "poisson";
        case FamilyKind::Bernoulli: return "bernoulli";
    }
    return "unknown";
}

FamilyKind parse_family_kind(std::string_view name) {
    if (name == "gaussian") return FamilyKind::Gaussian;
    if (name == "poisson") return FamilyKind::Poisson;
    if (name == "bernoulli") return FamilyKind::Bernoulli;
    throw ConfigError("unknown family '" + std::string(name) + "' (expected gaussian, poisson or bernoulli)");
}

void FamilySpec::validate() const {
    if (!(clamp > 0)) throw ConfigError("family clamp must be positive");
    if (kind == FamilyKind::Gaussian) {
        if (!(dispersion >= 0) || !std::isfinite(dispersion))
            throw ConfigError("gaussian dispersion must be a finite non-negative variance");
    } else if (dispersion != 1.0) {
        throw ConfigError(to_string(kind) + " dispersion is fixed at 1");
    }
}

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

bool in_support(double y, const FamilySpec& f) {
    switch (f.kind) {
        case FamilyKind::Gaussian: return std::isfinite(y);
        case FamilyKind::Poisson: return y >= 0 && std::isfinite(y) && std::floor(y) == y;
        case FamilyKind::Bernoulli: return y == 0.0 || y == 1.0;
    }
    return false;
}

void check_support(double y, const FamilySpec& f) {
    if (!in_support(y, f))
        throw DomainError("value " + std::to_string(y) + " is outside the " + to_string(f.kind) + " support");
}

double loglik(double y, double x, const FamilySpec& f) {
    check_support(y, f);
    switch (f.kind) {
        case FamilyKind::Gaussian: {
            const double r = y - x;
            return -r * r / (2.0 * f.dispersion) - 0.5 * std::log(2.0 * std::numbers::pi * f.dispersion);
        }
        case FamilyKind::Poisson: return -std::exp(x) + y * x - std::lgamma(y + 1.0);
        case FamilyKind::Bernoulli: return y * x - softplus(x);
    }
    return 0.0;
}

double score(double y, double x, const FamilySpec& f) {
    check_support(y, f);
    switch (f.kind) {
        case FamilyKind::Gaussian: return (y - x) / f.dispersion;
        case FamilyKind::Poisson: return y - std::exp(clamp_x(x, f));
        case FamilyKind::Bernoulli: return y - logistic(clamp_x(x, f));
    }
    return 0.0;
}

double neg_hess(double /*y*/, double x, const FamilySpec& f) {
    switch (f.kind) {
        case FamilyKind::Gaussian: return 1.0 / f.dispersion;
        case FamilyKind::Poisson: return std::exp(clamp_x(x, f));
        case FamilyKind::Bernoulli: {
            const double p = logistic(clamp_x(x, f));
            return p * (1.0 - p);
        }
    }
    return 0.0;
}

double mean_link(double x, const FamilySpec& f) {
    switch (f.kind) {
        case FamilyKind::Gaussian: return x;
        case FamilyKind::Poisson: return std::exp(x);
        case FamilyKind::Bernoulli: return logistic(x);
    }
    return 0.0;
}

double sample(double x, const FamilySpec& f, std::mt19937_64& rng) {
    switch (f.kind) {
        case FamilyKind::Gaussian: {
            if (f.dispersion == 0.0) return x;
            std::normal_distribution<double> dist(x, std::sqrt(f.dispersion));
            return dist(rng);
        }
        case FamilyKind::Poisson: {
            const double rate = std::exp(x);
            if (rate <= 0.0) return 0.0;
            std::poisson_distribution<long long> dist(rate);
            return static_cast<double>(dist(rng));
        }
        case FamilyKind::Bernoulli: {
            std::bernoulli_distribution dist(logistic(x));
            return dist(rng) ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

}  // namespace mlsm
