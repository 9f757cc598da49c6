#pragma once

#include <string>
#include <string_view>

namespace growthiv {

enum class Country { guatemala, philippines };
enum class Model { energy, protein_split };
enum class Outcome { height, weight };

std::string_view to_string(Country c);
std::string_view to_string(Model m);
std::string_view to_string(Outcome o);

// Throw ValidationError on unknown names.
Country parse_country(std::string_view s);
Model parse_model(std::string_view s);
Outcome parse_outcome(std::string_view s);

}  // namespace growthiv
