# Tests package initializer.
