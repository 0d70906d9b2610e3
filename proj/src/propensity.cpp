#include "ebpr/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace ebpr {

const char* to_string(NeighborhoodVariant v) {
  return v == NeighborhoodVariant::paper_sum ? "paper_sum" : "definitional_mean";
}

NeighborhoodVariant parse_neighborhood_variant(std::string_view text) {
  if (text == "paper_sum" || text == "sum") return NeighborhoodVariant::paper_sum;
  if (text == "definitional_mean" || text == "mean") return NeighborhoodVariant::definitional_mean;
  throw ConfigError("unknown neighborhood propensity variant '" + std::string(text) + "'");
}

std::vector<double> estimate_item_propensity(const InteractionDataset& ds) {
  if (ds.interaction_count() == 0) throw DataError("cannot estimate propensities from an empty dataset");
  std::size_t max_count = 0;
  for (ItemIndex i = 0; i < ds.n_items(); ++i) max_count = std::max(max_count, ds.item_count(i));
  std::vector<double> theta(ds.n_items());
  for (ItemIndex i = 0; i < ds.n_items(); ++i) {
    const auto c = ds.item_count(i);
    theta[i] = c == max_count ? 1.0
                              : std::sqrt(static_cast<double>(c) / static_cast<double>(max_count));
  }
  return theta;
}

std::vector<double> neighborhood_propensity(std::span<const double> theta, const ItemNeighborhoods& nbrs,
                                            NeighborhoodVariant variant) {
  if (theta.size() != nbrs.n_items()) throw ConfigError("propensity and neighborhood item counts differ");
  std::vector<double> out(nbrs.n_items(), 0.0);
  for (ItemIndex i = 0; i < nbrs.n_items(); ++i) {
    double sum = 0.0;
    for (const auto& nb : nbrs.of(i)) sum += theta[nb.item];
    out[i] = variant == NeighborhoodVariant::paper_sum ? sum : sum / static_cast<double>(nbrs.eta());
  }
  return out;
}

double clamp_propensity(double theta, double floor) { return std::max(theta, floor); }

std::vector<double> PropensityModel::clamped_items() const {
  std::vector<double> out(item.size());
  for (std::size_t i = 0; i < item.size(); ++i) out[i] = clamp_propensity(item[i], floor);
  return out;
}

PropensityModel build_propensity_model(const InteractionDataset& train, const ItemNeighborhoods& nbrs,
                                       NeighborhoodVariant variant, double floor) {
  if (!(floor > 0.0)) throw ConfigError("propensity floor must be > 0");
  PropensityModel model;
  model.item = estimate_item_propensity(train);
  model.neighborhood = neighborhood_propensity(model.item, nbrs, variant);
  model.eta = nbrs.eta();
  model.variant = variant;
  model.floor = floor;
  return model;
}

void write_propensities(const PropensityModel& model, const InteractionDataset& ds, std::ostream& out) {
  out << "# eta=" << model.eta << " variant=" << to_string(model.variant)
      << " floor=" << format_real(model.floor) << '\n';
  for (ItemIndex i = 0; i < model.item.size(); ++i) {
    out << ds.item_id(i) << '\t' << format_real(model.item[i]) << '\t'
        << format_real(model.neighborhood[i]) << '\n';
  }
}

PropensityModel read_propensities(std::istream& in, const InteractionDataset& ds) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line.front() != '#') {
    throw DataError("propensity artifact lacks a header");
  }
  PropensityModel model;
  {
    std::istringstream hs(line.substr(1));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "eta") model.eta = std::stoull(val);
      else if (key == "variant") model.variant = parse_neighborhood_variant(val);
      else if (key == "floor") model.floor = std::stod(val);
    }
  }
  model.item.assign(ds.n_items(), 0.0);
  model.neighborhood.assign(ds.n_items(), 0.0);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    double theta = 0.0, theta_n = 0.0;
    if (!std::getline(ls, id, '\t') || !(ls >> theta >> theta_n)) {
      throw DataError("malformed propensity line: " + line);
    }
    const auto i = ds.find_item(id);
    if (!i) throw DataError("propensity artifact references unknown item '" + id + "'");
    model.item[*i] = theta;
    model.neighborhood[*i] = theta_n;
    ++rows;
  }
  if (rows != ds.n_items()) throw DataError("propensity artifact does not cover every item");
  return model;
}

}  // namespace ebpr
