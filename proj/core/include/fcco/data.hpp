#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fcco/gdro.hpp"
#include "fcco/tpauc.hpp"

namespace fcco {

// Binary classification: header line, then rows "f1,...,fd,label".
TpaucDataset load_csv_binary(const std::string& path);
// Grouped: header line, then rows "group,f1,...,fd,label". Groups are ordered
// by ascending integer id.
GroupedDataset load_grouped_csv(const std::string& path, LossKind loss = LossKind::Hinge);
// MIL bags: header "bag_id,label,n_instances", header "x1,...,xd", then per bag
// one record line "id,label,count" followed by count feature lines.
TpaucDataset load_mil_bags(const std::string& path);

// Writers use the shortest representation that reads back to the same double.
void write_csv_binary(const std::string& path, const TpaucDataset& data);
void write_grouped_csv(const std::string& path, const GroupedDataset& data);
void write_mil_bags(const std::string& path, const TpaucDataset& data);

// Shortest round-trip text for a double.
std::string format_double(double x);
// Locale-independent parse of a full field; throws ParseError naming the line.
double parse_double(std::string_view field, const std::string& path, std::size_t line);

}  // namespace fcco
