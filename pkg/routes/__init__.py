# Read-only report API routes
