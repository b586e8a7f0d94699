class ZODBRoleManager(BasePlugin):

    def getRolesForPrincipal(self, principal, request=None):
        result = list(self._principal_roles.get(principal.getId(), ()))
        return tuple(result)

    #
    #   IRoleEnumerationPlugin implementation
    def enumerateRoles(self, id=None, exact_match=False, sort_by=None, max_results=None, **kw):
        """ See IRoleEnumerationPlugin.
        """
        role_info = []
        return tuple(role_info)
