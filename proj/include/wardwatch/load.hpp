#pragma once

#include <string>
#include <vector>

#include "wardwatch/core.hpp"

namespace ww {

enum class FileFormat { csv, jsonl };

// Loads a dataset from the documented file schemas. CSV datasets are the
// five files admissions/transfers/events/diagnoses/meds (recognized by
// file name); JSONL datasets are one admission object per line. Malformed
// records become violations, never aborts; missing columns and unreadable
// files do abort. The result is validated and canonically ordered, so two
// loads of the same files are identical.
Dataset load_dataset(const std::vector<std::string>& paths, FileFormat format);

// Convenience: load every recognized file in a directory.
Dataset load_dataset_dir(const std::string& dir, FileFormat format);

void save_dataset(const Dataset& ds, const std::string& dir, FileFormat format);

// Cleaning and invariant enforcement applied by load_dataset; exposed for
// datasets built in memory. Sorts admissions by id, events by timestamp,
// drops out-of-stay events, deduplicates, and canonicalizes units.
Dataset validate_dataset(std::vector<Admission> admissions);

}  // namespace ww
