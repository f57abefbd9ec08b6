# Tests package for the authentication system
