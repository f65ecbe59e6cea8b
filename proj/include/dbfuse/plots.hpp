#pragma once

#include <string>
#include <vector>

#include "dbfuse/metrics.hpp"
#include "dbfuse/training.hpp"

namespace dbfuse {

// formats: any of "png", "svg". Each plot is written as <dir>/<stem>.<fmt>.
void plot_training_curves(const TrainingHistory& history, const std::string& dir,
                          const std::vector<std::string>& formats);

void plot_confusion_matrix(const ConfusionMatrix& cm, const std::string& dir,
                           const std::string& stem, const std::vector<std::string>& formats);

void plot_roc_curves(const MulticlassRoc& roc, const std::vector<std::string>& class_names,
                     const std::string& dir, const std::string& stem,
                     const std::vector<std::string>& formats);

}  // namespace dbfuse
