// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_IO_HPP
#define HMFM_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "hmfm/chain.hpp"
#include "hmfm/likelihood.hpp"
#include "hmfm/postprocess.hpp"

namespace hmfm {

/// Shortest decimal form that round-trips (17 significant digits at most).
std::string format_double(double v);

/// Reads `group,obs,y[,x1..xr]` data. Rows sharing (group, obs) form one
/// observation with several marks; observations keep first-appearance order.
GroupedDataset parse_csv(std::istream& in, const std::string& source = "<stream>");
GroupedDataset ingest_csv(const std::string& path);

/// Writes a dataset in the ingest format (obs = 1-based position in group).
void write_dataset_csv(std::ostream& out, const GroupedDataset& data);

void write_scalars_csv(std::ostream& out, const ChainOutput& chain);
void write_allocations_csv(std::ostream& out, const ChainOutput& chain, const GroupedDataset& data);
void write_components_csv(std::ostream& out, const ChainOutput& chain);
void write_matrix_csv(std::ostream& out, const MatrixXd& m);
void write_partition_csv(std::ostream& out, const PartitionEstimate& est, const GroupedDataset& data);
void write_density_csv(std::ostream& out, const std::vector<double>& grid, const std::vector<double>& density);

/// Reads `group,obs,cluster` rows into flat group-major labels (0-based),
/// ordered by group then obs.
Partition read_labels_csv(const std::string& path);
MatrixXd read_matrix_csv(const std::string& path);

/// Comma-separated numbers.
std::vector<double> parse_number_list(const std::string& s);

}  // namespace hmfm

#endif  // HMFM_IO_HPP
