# Core application components
