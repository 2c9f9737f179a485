#pragma once

#include <random>
#include <string>
#include <string_view>

namespace mlsm {

enum class FamilyKind { Gaussian, Poisson, Bernoulli };

std::string to_string(FamilyKind kind);
FamilyKind parse_family_kind(std::string_view name);

// Edge distribution in natural-parameter form. dispersion is the Gaussian
// variance (1 for Poisson and Bernoulli); clamp bounds |x| wherever derivatives
// are evaluated for the Poisson and Bernoulli families.
struct FamilySpec {
    FamilyKind kind = FamilyKind::Gaussian;
    double dispersion = 1.0;
    double clamp = 30.0;

    static FamilySpec gaussian(double variance = 1.0) { return {FamilyKind::Gaussian, variance, 30.0}; }
    static FamilySpec poisson(double clamp = 30.0) { return {FamilyKind::Poisson, 1.0, clamp}; }
    static FamilySpec bernoulli(double clamp = 30.0) { return {FamilyKind::Bernoulli, 1.0, clamp}; }

    /// Throws ConfigError when the invariants (positive dispersion and clamp, unit dispersion
    /// for Poisson/Bernoulli) fail.
    void validate() const;

    /// Whether |x| must stay within the clamp during optimization.
    bool bounded_domain() const { return kind != FamilyKind::Gaussian; }
};

bool in_support(double y, const FamilySpec& f);
/// Throws DomainError unless y is in the family's support.
void check_support(double y, const FamilySpec& f);

double loglik(double y, double x, const FamilySpec& f);
/// d loglik / dx.
double score(double y, double x, const FamilySpec& f);
/// -d^2 loglik / dx^2, strictly positive.
double neg_hess(double y, double x, const FamilySpec& f);
/// Mean of y given the natural parameter x.
double mean_link(double x, const FamilySpec& f);

double sample(double x, const FamilySpec& f, std::mt19937_64& rng);

double logistic(double x);

}  // namespace mlsm
