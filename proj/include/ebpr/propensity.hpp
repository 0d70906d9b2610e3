#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ebpr/dataset.hpp"
#include "ebpr/explainability.hpp"

namespace ebpr {

enum class NeighborhoodVariant {
  definitional_mean,  // sum over the neighborhood divided by eta
  paper_sum,          // plain sum; the constant denominator is dropped
};

const char* to_string(NeighborhoodVariant v);
NeighborhoodVariant parse_neighborhood_variant(std::string_view text);

inline constexpr double kDefaultPropensityFloor = 1e-3;

// theta_i = sqrt(count_i / max_l count_l). Throws DataError on an empty dataset.
std::vector<double> estimate_item_propensity(const InteractionDataset& ds);

// Empty neighborhoods give 0.
std::vector<double> neighborhood_propensity(std::span<const double> theta,
                                            const ItemNeighborhoods& nbrs,
                                            NeighborhoodVariant variant);

// max(theta, floor); applied wherever a propensity is a denominator.
double clamp_propensity(double theta, double floor);

struct PropensityModel {
  std::vector<double> item;          // unclamped theta
  std::vector<double> neighborhood;  // unclamped theta_N
  std::size_t eta = 0;
  NeighborhoodVariant variant = NeighborhoodVariant::paper_sum;
  double floor = kDefaultPropensityFloor;

  double item_denominator(ItemIndex i) const { return clamp_propensity(item[i], floor); }
  double neighborhood_denominator(ItemIndex i) const {
    return clamp_propensity(neighborhood[i], floor);
  }
  // Per-item theta with the floor applied, for metrics that take logarithms.
  std::vector<double> clamped_items() const;
};

PropensityModel build_propensity_model(const InteractionDataset& train,
                                       const ItemNeighborhoods& nbrs,
                                       NeighborhoodVariant variant = NeighborhoodVariant::paper_sum,
                                       double floor = kDefaultPropensityFloor);

// "# eta=.. variant=.. floor=.." then item_id <TAB> theta <TAB> theta_N.
void write_propensities(const PropensityModel& model, const InteractionDataset& ds, std::ostream& out);
PropensityModel read_propensities(std::istream& in, const InteractionDataset& ds);

}  // namespace ebpr
