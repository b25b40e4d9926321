#!/usr/bin/env python3
"""
Launcher for the pg2 command line
"""
import os
import sys

if __name__ == "__main__":
    if not os.path.exists(".env"):
        print("[WARN] .env file not found, using default settings")
        print("Note: copy env.template to .env to change the runs directory, device or log level")

    from pg2.main import main

    sys.exit(main(sys.argv[1:]))
