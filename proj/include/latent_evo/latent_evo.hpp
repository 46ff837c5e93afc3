#pragma once

#include "latent_evo/baselines.hpp"
#include "latent_evo/config.hpp"
#include "latent_evo/cosyne.hpp"
#include "latent_evo/engine.hpp"
#include "latent_evo/es.hpp"
#include "latent_evo/evaluate.hpp"
#include "latent_evo/generator.hpp"
#include "latent_evo/image.hpp"
#include "latent_evo/latent.hpp"
#include "latent_evo/report.hpp"
#include "latent_evo/reward.hpp"
#include "latent_evo/rng.hpp"
#include "latent_evo/runner.hpp"
#include "latent_evo/solution_space.hpp"
#include "latent_evo/stub.hpp"
