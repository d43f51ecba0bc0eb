#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tatdv/types.hpp"

namespace tatdv {

// All defaults reproduce the measurement model the pipeline is built to
// estimate: three correlated latents, eleven indicators in the canonical
// order, couple-shared unpaid-work gaps.
struct GeneratorSpec {
  std::size_t n_couples = 848;
  uint64_t seed = 20240901;

  double psi_masc_just = 0.799;
  double psi_masc_gap = -0.170;
  double psi_just_gap = 0.0;

  std::array<double, 11> lambda = {13.33, 13.99, 15.05, 8.82, 15.503, 14.31,
                                   12.54, 13.746, 15.49, 1.02, 1.14};
  std::array<double, 11> eps = {313.4549,   444.2777, 282.5718, 371.0491,
                                282.770591, 618.6601, 578.0046, 862.839484,
                                263.8133,   82.33865, 15.12704};
  // Survey items sit mid-scale; the gap indicators are ratios and need
  // feasible centers (a ratio mean of 50 would mean women doing 51x the
  // male hours).
  std::array<double, 11> means = {50, 50, 50, 50, 50, 50, 50, 50, 50, 0.8, 0.6};

  bool clip_survey = false;  // clip survey-scale indicator draws to [0,100]

  // Diary realization.
  double male_chores_lo = 4.0, male_chores_hi = 12.0;      // weekly hours
  double male_childcare_lo = 3.0, male_childcare_hi = 10.0;
  double domain_cap = 40.0;   // per-domain weekly cap (slots stay feasible)
  double leisure_cap = 50.0;  // weekly partner-leisure cap
  double male_report_inflation = 0.10;

  // Outcome layer: partner-leisure targets as linear functions of the
  // respondent's composite.
  double leisure_children_const = 15.5, leisure_children_slope = 1.335;
  double leisure_partner_const = 18.7, leisure_partner_slope = 0.783;
  double leisure_resid_sd = 6.0;

  // Two-arm treatment layer for the binary-outcome analog.
  double treatment_ame = -0.05;
  double control_rate = 0.5;  // P(latent outcome = 1 | untreated)
  double treated_share = 0.5;

  Eigen::Matrix3d psi() const;

  static GeneratorSpec from_json_file(const std::string& path);
  static GeneratorSpec from_json_string(const std::string& json);
};

// Population quantities of the composite the measurement model assigns:
// regression-score coefficients, score standard deviations, and the
// first-principal-component loadings of the (reversed) score correlation.
struct PopulationComposite {
  Eigen::MatrixXd score_coef;  // 3 x 11, scores = coef * (x - mean)
  Eigen::Vector3d score_sd;
  Eigen::Vector3d phi;         // leading eigenvector, phi[0] > 0
  double lead_eigenvalue = 0.0;

  double composite_of(const Eigen::VectorXd& x, const std::array<double, 11>& means) const;
};

PopulationComposite population_composite(const GeneratorSpec& spec);

struct IndicatorSim {
  Eigen::MatrixXd indicators;  // n x 11
  Eigen::MatrixXd latents;     // n x 3
  double clip_fraction = 0.0;
  std::array<double, 11> clip_fraction_by{};
};

// Independent respondents drawn straight from the measurement model;
// couple sharing applies only to emitted datasets.
IndicatorSim simulate_indicators(const GeneratorSpec& spec, std::size_t n_respondents);

struct RespondentTruth {
  std::string respondent_id;
  double latent_just = 0, latent_masc = 0, latent_gap = 0;
  double composite = 0;     // population-rule composite of realized indicators
  double leisure_children_target = 0, leisure_partner_target = 0;  // post-inflation
};

struct CoupleBundle {
  Taxonomy taxonomy;
  std::vector<SurveyResponse> surveys;
  std::vector<DiaryDay> diaries;

  std::vector<RespondentTruth> truth;
  PopulationComposite population;
  double clip_fraction = 0.0;
  std::array<double, 11> clip_fraction_by{};
  double gap_clamp_fraction = 0.0;  // raw gaps below the -1 feasibility floor
  GeneratorSpec spec;
};

CoupleBundle simulate_couple_bundle(const GeneratorSpec& spec);

// survey.csv, diary.csv, taxonomy.csv, truth.json; bit-exact against the
// ingest schemas. Throws InfeasibleTarget when a weekly target cannot fit
// a diary.
void write_couple_dataset(const CoupleBundle& bundle, const std::string& out_dir);
void simulate_couple_dataset(const GeneratorSpec& spec, const std::string& out_dir);

// Weekly hours -> (weekday slots, weekend slots) with
// |(5*wd + 2*we)/6 - hours| <= 1/6.
std::pair<int, int> split_weekly_hours(double hours);

}  // namespace tatdv
