#pragma once

// Everything except the command-line front end (peduncle/cli.hpp).

#include "peduncle/camera.hpp"
#include "peduncle/clustering.hpp"
#include "peduncle/cnn/layers.hpp"
#include "peduncle/cnn/network.hpp"
#include "peduncle/cnn/score_map.hpp"
#include "peduncle/cnn/tensor.hpp"
#include "peduncle/config.hpp"
#include "peduncle/detectors.hpp"
#include "peduncle/error.hpp"
#include "peduncle/eval.hpp"
#include "peduncle/features.hpp"
#include "peduncle/fpfh.hpp"
#include "peduncle/geometry.hpp"
#include "peduncle/hsv.hpp"
#include "peduncle/image.hpp"
#include "peduncle/kdtree.hpp"
#include "peduncle/naive_bayes.hpp"
#include "peduncle/normals.hpp"
#include "peduncle/pipeline.hpp"
#include "peduncle/point_cloud.hpp"
#include "peduncle/scenegen.hpp"
#include "peduncle/svm.hpp"
#include "peduncle/text_io.hpp"
