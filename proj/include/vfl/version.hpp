#pragma once

#define VFL_VERSION "0.1.0"
