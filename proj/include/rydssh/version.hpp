#pragma once

#define RYDSSH_VERSION_MAJOR 1
#define RYDSSH_VERSION_MINOR 0
#define RYDSSH_VERSION_PATCH 0
#define RYDSSH_VERSION_STRING "1.0.0"
