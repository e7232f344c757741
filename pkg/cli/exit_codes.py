"""Process exit codes shared by all subcommands."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ESTIMATION = 4
EXIT_ABORTED = 5
